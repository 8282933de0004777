#pragma once

#include <map>
#include <string>
#include <vector>

#include "duet/minimizer.hpp"

namespace duet {

/// Flat key-value config file: one `key = value` per line, `#` comments,
/// comma-separated lists where a key accepts several values.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text);

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

/// Keys: J, m, gamma, K, cap (number or "uncapped"), mixing, cells_per_radius,
/// max_iter, tol_mass, tol_fixedpoint, tol_multiplier, seed, coupling, margin.
SolverConfig solver_config_from(const KeyValueFile& kv);

struct SweepConfig {
    std::vector<double> J, m, gamma;
    SolverConfig base;  // shared solver settings
};

/// Same keys as the solver config, with J, m and gamma as lists.
SweepConfig sweep_config_from(const KeyValueFile& kv);

}  // namespace duet
