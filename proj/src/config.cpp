#include "duet/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace duet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad numeric value for '" + key + "': " + text);
    }
}

}  // namespace

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: missing '=' on line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config: empty key or value on line " +
                                        std::to_string(lineno));
        if (kv.entries_.count(key))
            throw std::invalid_argument("config: duplicate key '" + key + "'");
        kv.entries_[key] = value;
    }
    return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str());
}

std::string KeyValueFile::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::invalid_argument("config: missing key '" + key + "'");
    return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key) const {
    return parse_double(key, get(key));
}

std::vector<double> KeyValueFile::get_list(const std::string& key) const {
    std::vector<double> out;
    std::string text = get(key);
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(key, item));
    }
    if (out.empty()) throw std::invalid_argument("config: empty list for '" + key + "'");
    return out;
}

namespace {

void apply_common(SolverConfig& cfg, const KeyValueFile& kv) {
    if (kv.has("gamma")) cfg.gamma = kv.get_double("gamma");
    if (kv.has("K")) cfg.kpress = kv.get_double("K");
    if (kv.has("cap")) {
        std::string c = kv.get("cap");
        cfg.cap = (c == "uncapped") ? std::numeric_limits<double>::infinity()
                                    : parse_double("cap", c);
    }
    if (kv.has("mixing")) cfg.mixing = kv.get_double("mixing");
    if (kv.has("cells_per_radius")) cfg.cells_per_radius = int(kv.get_double("cells_per_radius"));
    if (kv.has("max_iter")) cfg.max_iter = int(kv.get_double("max_iter"));
    if (kv.has("tol_mass")) cfg.tol_mass = kv.get_double("tol_mass");
    if (kv.has("tol_fixedpoint")) cfg.tol_fixedpoint = kv.get_double("tol_fixedpoint");
    if (kv.has("tol_multiplier")) cfg.tol_multiplier = kv.get_double("tol_multiplier");
    if (kv.has("margin")) cfg.margin = kv.get_double("margin");
    if (kv.has("seed")) {
        std::string s = kv.get("seed");
        if (s == "lane_emden") cfg.seed = SeedKind::lane_emden;
        else if (s == "uniform") cfg.seed = SeedKind::uniform;
        else throw std::invalid_argument("config: seed must be lane_emden or uniform");
    }
    if (kv.has("coupling")) {
        std::string c = kv.get("coupling");
        if (c == "monopole") cfg.coupling = Coupling::monopole;
        else if (c == "quadrupole") cfg.coupling = Coupling::quadrupole;
        else throw std::invalid_argument("config: coupling must be monopole or quadrupole");
    }
}

const char* kKnownKeys[] = {"J",       "m",          "gamma",          "K",
                            "cap",     "mixing",     "cells_per_radius", "max_iter",
                            "tol_mass", "tol_fixedpoint", "tol_multiplier", "seed",
                            "coupling", "margin"};

void reject_unknown(const KeyValueFile& kv) {
    for (const auto& [key, value] : kv.entries()) {
        bool known = false;
        for (const char* k : kKnownKeys)
            if (key == k) known = true;
        if (!known) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

}  // namespace

SolverConfig solver_config_from(const KeyValueFile& kv) {
    reject_unknown(kv);
    SolverConfig cfg;
    if (kv.has("J")) cfg.J = kv.get_double("J");
    if (kv.has("m")) cfg.m = kv.get_double("m");
    apply_common(cfg, kv);
    cfg.validate();
    return cfg;
}

SweepConfig sweep_config_from(const KeyValueFile& kv) {
    reject_unknown(kv);
    SweepConfig sw;
    sw.J = kv.get_list("J");
    sw.m = kv.get_list("m");
    sw.gamma = kv.get_list("gamma");
    apply_common(sw.base, kv);
    // Per-point validation happens as each solve is configured.
    return sw;
}

}  // namespace duet
