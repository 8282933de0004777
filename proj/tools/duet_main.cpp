// Command-line front end: lane-emden tables, single solves, the built-in
// verification suites, and parameter sweeps.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "CLI11.hpp"
#include "duet/config.hpp"
#include "duet/diagnostics.hpp"
#include "duet/lane_emden.hpp"
#include "duet/minimizer.hpp"

using namespace duet;
namespace fs = std::filesystem;

namespace {

// 0 ok, 1 verify failure, 2 usage/config, 3 unsupported physics,
// 4 non-convergence, 5 infeasible geometry.
enum ExitCode {
    kOk = 0,
    kVerifyFailed = 1,
    kUsage = 2,
    kUnsupported = 3,
    kNotConverged = 4,
    kInfeasible = 5,
};

struct Manifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> fields;
    std::vector<std::string> outputs;
    std::string started = utc_timestamp();

    void add(const std::string& key, const std::string& value) { fields.push_back({key, value}); }
    void add(const std::string& key, double value) { add(key, fp17(value)); }
    void output(const std::string& path) { outputs.push_back(path); }

    void write(const fs::path& dir, const std::string& status, const std::string& error = "") {
        std::error_code ec;
        fs::create_directories(dir, ec);
        std::ofstream f(dir / "manifest.txt", std::ios::trunc);
        if (!f) return;
        f << "command: " << command << "\n";
        f << "version: " << DUET_VERSION << "\n";
        f << "started: " << started << "\n";
        f << "finished: " << utc_timestamp() << "\n";
        f << "status: " << status << "\n";
        if (!error.empty()) f << "error: " << error << "\n";
        for (auto& [k, v] : fields) f << k << ": " << v << "\n";
        for (auto& o : outputs) f << "output: " << o << "\n";
    }
};

void add_config_fields(Manifest& man, const SolverConfig& cfg) {
    man.add("config.J", cfg.J);
    man.add("config.m", cfg.m);
    man.add("config.gamma", cfg.gamma);
    man.add("config.K", cfg.kpress);
    man.add("config.cap", std::isfinite(cfg.cap) ? fp17(cfg.cap) : std::string("uncapped"));
    man.add("config.mixing", cfg.mixing);
    man.add("config.cells_per_radius", std::to_string(cfg.cells_per_radius));
    man.add("config.max_iter", std::to_string(cfg.max_iter));
    man.add("config.tol_mass", cfg.tol_mass);
    man.add("config.tol_fixedpoint", cfg.tol_fixedpoint);
    man.add("config.tol_multiplier", cfg.tol_multiplier);
    man.add("config.margin", cfg.margin);
    man.add("config.seed", cfg.seed == SeedKind::lane_emden ? "lane_emden" : "uniform");
    man.add("config.coupling",
            cfg.coupling == Coupling::monopole ? "monopole" : "quadrupole");
}

void write_result_json(const MinimizerResult& res, const SolverConfig& cfg,
                       const fs::path& path) {
    JsonWriter w;
    w.begin_object();
    w.key_value("converged", res.converged);
    w.key_value("iterations", res.iterations);
    w.key_value("J", res.J);
    w.begin_object("domains");
    w.key_value("eta", res.domains.eta);
    w.key_value("ball_radius", res.domains.ball_radius);
    w.key_value("center_planet", res.domains.center_planet);
    w.key_value("center_star", res.domains.center_star);
    w.end_object();
    w.begin_object("energy");
    w.key_value("U", res.breakdown.U);
    w.key_value("Gself", res.breakdown.Gself);
    w.key_value("Ginter", res.breakdown.Ginter);
    w.key_value("TJ", res.breakdown.TJ);
    w.key_value("EJ", res.breakdown.EJ);
    w.key_value("I", res.breakdown.I);
    w.key_value("xbar", res.breakdown.xbar);
    w.key_value("seed_EJ", res.seed_energy);
    w.end_object();
    w.begin_array("patches");
    for (std::size_t p = 0; p < res.system.patches.size(); ++p) {
        w.object_in_array();
        w.key_value("label", res.system.patches[p].label);
        w.key_value("target_mass", res.system.patches[p].target_mass);
        w.key_value("mass", res.breakdown.masses[p]);
        w.key_value("lambda", res.multipliers[p]);
        w.key_value("mass_error", res.mass_errors[p]);
        w.key_value("el_active", res.el_residuals[p].active);
        w.key_value("el_slack", res.el_residuals[p].slack);
        w.end_object();
    }
    w.end_array();
    w.key_value("change", res.change);
    w.key_value("servo_tilt", res.servo_tilt);
    w.key_value("gauge_bound", res.gauge_bound);
    w.key_value("mixing", cfg.mixing);
    w.begin_array("change_history");
    for (double c : res.change_history) w.array_value(c);
    w.end_array();
    w.end_object();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f << w.str() << "\n";
}

int cmd_lane_emden(double gamma, double kpress, std::vector<double> masses,
                   const std::string& out) {
    Manifest man;
    man.command = "lane-emden";
    man.add("config.gamma", gamma);
    man.add("config.kpress", kpress);
    fs::path dir(out);
    try {
        if (!(gamma > 4.0 / 3.0) || !(kpress > 0.0)) {
            man.write(dir, "error", "unsupported physics: need gamma > 4/3 and K > 0");
            std::fprintf(stderr, "lane-emden: unsupported gamma %g (need > 4/3)\n", gamma);
            return kUnsupported;
        }
        if (masses.empty()) masses.push_back(1.0);
        fs::create_directories(dir);
        PolytropicEos eos(kpress, gamma);
        RadialProfile unit = solve_unit(eos);

        fs::path summary = dir / "summary.csv";
        std::ofstream s(summary, std::ios::trunc);
        s << "m,R_m,rho_c,lambda_m,e0_m\n";
        for (std::size_t i = 0; i < masses.size(); ++i) {
            RadialProfile p = rescale(unit, masses[i]);
            char name[64];
            std::snprintf(name, sizeof(name), "profile_%g.csv", masses[i]);
            fs::path csv = dir / name;
            write_profile_csv(p, csv.string());
            man.output(csv.string());
            s << fp17(p.mass) << "," << fp17(p.radius) << "," << fp17(p.central_density) << ","
              << fp17(p.lambda) << "," << fp17(p.e0) << "\n";
        }
        s.close();
        man.output(summary.string());
        man.write(dir, "ok");
        return kOk;
    } catch (const std::exception& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "lane-emden: %s\n", e.what());
        return kUsage;
    }
}

int cmd_minimize(const std::string& config_path, const std::string& out) {
    Manifest man;
    man.command = "minimize";
    fs::path dir(out);
    SolverConfig cfg;
    try {
        cfg = solver_config_from(KeyValueFile::parse_file(config_path));
    } catch (const UnsupportedPhysics& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "minimize: %s\n", e.what());
        return kUnsupported;
    } catch (const std::exception& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "minimize: %s\n", e.what());
        return kUsage;
    }
    add_config_fields(man, cfg);
    try {
        fs::create_directories(dir);
        MinimizerResult res = minimize(cfg);
        for (const Patch& p : res.system.patches) {
            fs::path snap = dir / (p.label + ".gpd");
            write_gpd1(p.density, snap.string());
            man.output(snap.string());
        }
        fs::path json = dir / "result.json";
        write_result_json(res, cfg, json);
        man.output(json.string());
        man.add("converged", res.converged ? "true" : "false");
        man.add("iterations", std::to_string(res.iterations));
        man.add("EJ", res.breakdown.EJ);
        man.write(dir, "ok");
        if (!res.converged) {
            std::fprintf(stderr, "minimize: max_iter reached, change %.3e\n", res.change);
            return kNotConverged;
        }
        return kOk;
    } catch (const InfeasibleGeometry& e) {
        std::string hint = std::string(e.what()) + "; min feasible J ~= " +
                           fp17(e.min_feasible_J) +
                           (e.max_feasible_m > 0.0
                                ? ", max feasible m ~= " + fp17(e.max_feasible_m)
                                : std::string());
        man.write(dir, "error", hint);
        std::fprintf(stderr, "minimize: %s\n", hint.c_str());
        return kInfeasible;
    } catch (const UnsupportedPhysics& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "minimize: %s\n", e.what());
        return kUnsupported;
    } catch (const std::exception& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "minimize: %s\n", e.what());
        return kUsage;
    }
}

struct Check {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double expected = 0.0;
};

std::vector<Check> run_verify_checks(bool full, const std::string& inject) {
    std::vector<Check> checks;
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto push = [&](const std::string& name, bool pass, double measured, double expected) {
        checks.push_back({name, pass, measured, expected});
    };

    {  // enthalpy inverse round trip
        PolytropicEos eos(1.3, 1.9);
        double worst = 0.0;
        for (double s : {1e-6, 1e-2, 1.0, 10.0})
            worst = std::max(worst, std::abs(eos.a_prime_inv(eos.a_prime(s)) - s) / s);
        push("eos-roundtrip", worst <= 1e-12, worst, 1e-12);
    }
    {  // inertia expansion identity
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            GridDensity a(GridGeometry::cube(10, 0.5, {0, 0, 0}));
            GridDensity b = a, ab = a;
            for (int k = 0; k < 10; ++k)
                for (int j = 0; j < 10; ++j)
                    for (int i = 0; i < 10; ++i) {
                        if (u01(rng) > 0.5) continue;
                        double v = u01(rng) + 0.01;
                        (i < 5 ? a : b).values[a.geom.index(i, j, k)] = v;
                        ab.values[a.geom.index(i, j, k)] = v;
                    }
            if (a.mass() <= 0 || b.mass() <= 0) continue;
            auto [Iab, xab] = moment_of_inertia(ab);
            auto [Ia, xa] = moment_of_inertia(a);
            auto [Ib, xb] = moment_of_inertia(b);
            double m1 = a.mass(), m2 = b.mass();
            double expect = Ia + Ib + m1 * m2 / (m1 + m2) * r2_axis(xa - xb);
            worst = std::max(worst, std::abs(Iab - expect) / std::abs(expect));
        }
        push("moi-expansion", worst <= 1e-10, worst, 1e-10);
    }
    {  // potential bound
        bool ok = true;
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            GridDensity rho(GridGeometry::cube(8 + int(rng() % 6), 0.2 + 0.3 * u01(rng),
                                               {0, 0, 0}));
            for (double& v : rho.values)
                if (u01(rng) < 0.4) v = u01(rng);
            if (rho.mass() <= 0.0) continue;
            GridField V = potential(rho);
            double vmax = 0.0;
            for (double v : V.values) vmax = std::max(vmax, v);
            double bound = potential_sup_bound(rho);
            worst = std::max(worst, vmax / bound);
            if (vmax > bound) ok = false;
        }
        push("potential-bound", ok, worst, 1.0);
    }
    {  // Kepler argmin
        double got = kepler_argmin(0.25, 1.0);
        push("kepler-argmin", got == 16.0, got, 16.0);
    }
    {  // g0(1) = 0 exactly
        double got = g_functions(1.0, 0.0, 1.0, 0.5).g0;
        push("g0-at-1", got == 0.0, got, 0.0);
    }
    {  // interpolation inequality
        GridDensity rho(GridGeometry::cube(10, 0.4, {0, 0, 0}));
        for (double& v : rho.values) v = u01(rng);
        bool ok = interpolation_check(rho, 1.0, 4.0 / 3.0,
                                      std::numeric_limits<double>::infinity());
        push("interpolation", ok, ok ? 1.0 : 0.0, 1.0);
    }
    {  // analytic n = 1 polytrope
        PolytropicEos eos(1.0, 2.0);
        RadialProfile p = solve_unit(eos);
        double kpi = 3.14159265358979323846;
        double err_xi = std::abs(p.xi1 - kpi);
        double err_R = std::abs(p.radius - std::sqrt(kpi / 2.0)) / std::sqrt(kpi / 2.0);
        push("lane-emden-gold", err_xi <= 1e-8 && err_R <= 1e-4, std::max(err_xi, err_R), 1e-4);
        double closed = lambda_of_mass(p, 0.5);
        double surface = rescale(p, 0.5).lambda;
        double err_l = std::abs(closed - surface) / std::abs(surface);
        push("multiplier-identity", err_l <= 1e-4, err_l, 1e-4);
    }
    {  // energy assembly; the injection hook flips TJ in the reassembly
        PatchSystem sys;
        GridDensity a(GridGeometry::cube(8, 0.4, {0, 0, 0}));
        GridDensity b(GridGeometry::cube(8, 0.4, {20, 0, 0}));
        for (double& v : a.values) v = u01(rng);
        for (double& v : b.values) v = 0.5 * u01(rng);
        sys.patches.push_back({a, "planet", a.mass()});
        sys.patches.push_back({b, "star", b.mass()});
        PolytropicEos eos(1.0, 2.0);
        EnergyBreakdown e = energies(sys, 0.6, eos);
        double tj = (inject == "tj-sign") ? -e.TJ : e.TJ;
        double rebuilt = e.U - 0.5 * e.Gself + tj;
        double err = std::abs(rebuilt - e.EJ) / std::abs(e.EJ);
        push("energy-assembly", err <= 1e-12, err, 1e-12);
    }

    if (!full) return checks;

    {  // transform vs direct summation
        GridDensity rho(GridGeometry::cube(12, 0.3, {0, 0, 0}));
        for (double& v : rho.values)
            if (u01(rng) < 0.3) v = u01(rng);
        GridField fast = potential(rho);
        GridField slow = potential_direct(rho);
        double vmax = 0.0, dmax = 0.0;
        for (std::size_t c = 0; c < fast.values.size(); ++c) {
            vmax = std::max(vmax, std::abs(slow.values[c]));
            dmax = std::max(dmax, std::abs(fast.values[c] - slow.values[c]));
        }
        push("potential-vs-direct", dmax <= 1e-10 * vmax, dmax / vmax, 1e-10);
    }
    {  // grid energy against radial quadrature
        PolytropicEos eos(1.0, 2.0);
        RadialProfile p = solve_unit(eos);
        GridDensity rho = to_grid(p, 48, p.radius / 16.0, {0, 0, 0});
        double e = energies(rho, 0.0, eos).EJ;
        double err = std::abs(e - p.e0) / std::abs(p.e0);
        push("grid-e0", err <= 0.02, err, 0.02);
    }
    {  // non-rotating minimize against the analytic density
        SolverConfig cfg;
        cfg.J = 0.0;
        cfg.gamma = 2.0;
        cfg.cells_per_radius = 12;
        MinimizerResult res = minimize(cfg);
        PolytropicEos eos = cfg.eos();
        RadialProfile unit = solve_unit(eos);
        const GridDensity& rho = res.system.patches[0].density;
        GridDensity ref = to_grid(unit, rho.geom.nx, rho.geom.h, {0, 0, 0});
        KahanSum diff;
        for (std::size_t c = 0; c < rho.values.size(); ++c)
            diff.add(std::abs(rho.values[c] - ref.values[c]));
        double l1 = diff.value() * rho.geom.cell_volume();
        push("minimize-gold", res.converged && l1 <= 0.02, l1, 0.02);
        double ep = ep_residual(res, eos);
        push("ep-hydrostatic", ep <= 0.05, ep, 0.05);
    }
    return checks;
}

int cmd_verify(const std::string& suite, const std::string& out, const std::string& inject) {
    Manifest man;
    man.command = "verify";
    man.add("config.suite", suite);
    fs::path dir(out);
    auto t0 = std::chrono::steady_clock::now();
    try {
        bool full = suite == "full";
        std::vector<Check> checks = run_verify_checks(full, inject);
        bool all = true;
        std::printf("%-22s %-6s %-14s %s\n", "check", "status", "measured", "threshold");
        for (const Check& c : checks) {
            all = all && c.pass;
            std::printf("%-22s %-6s %-14.6g %g\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                        c.measured, c.expected);
            man.add("check." + c.name, c.pass ? "pass" : "fail");
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (full && secs > 600.0)
            std::fprintf(stderr, "verify: full suite took %.0f s (budget 600 s)\n", secs);
        man.add("elapsed_seconds", secs);
        man.write(dir, all ? "ok" : "failed");
        return all ? kOk : kVerifyFailed;
    } catch (const std::exception& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "verify: %s\n", e.what());
        return kUsage;
    }
}

int cmd_sweep(const std::string& config_path, const std::string& out, int jobs) {
    Manifest man;
    man.command = "sweep";
    fs::path dir(out);
    SweepConfig sw;
    try {
        sw = sweep_config_from(KeyValueFile::parse_file(config_path));
    } catch (const std::exception& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "sweep: %s\n", e.what());
        return kUsage;
    }
    try {
        fs::create_directories(dir);
        struct Point {
            double J, m, gamma;
        };
        std::vector<Point> points;
        for (double J : sw.J)
            for (double m : sw.m)
                for (double g : sw.gamma) {
                    bool dup = false;
                    for (const Point& p : points)
                        if (p.J == J && p.m == m && p.gamma == g) dup = true;
                    if (dup) {
                        std::fprintf(stderr, "sweep: duplicate point (J=%g, m=%g, gamma=%g)\n",
                                     J, m, g);
                        continue;
                    }
                    points.push_back({J, m, g});
                }
        std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
            if (a.J != b.J) return a.J < b.J;
            if (a.m != b.m) return a.m < b.m;
            return a.gamma < b.gamma;
        });
        man.add("points", std::to_string(points.size()));
        man.add("jobs", std::to_string(jobs));

        // Unit profiles per gamma, solved before the pool spins up.
        std::map<double, RadialProfile> units;
        for (const Point& p : points)
            if (!units.count(p.gamma) && p.gamma > 1.5)
                units.emplace(p.gamma, solve_unit(PolytropicEos(sw.base.kpress, p.gamma)));

        std::vector<SweepPoint> rows(points.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= points.size()) return;
                SolverConfig cfg = sw.base;
                cfg.J = points[i].J;
                cfg.m = points[i].m;
                cfg.gamma = points[i].gamma;
                SweepPoint row;
                row.J = cfg.J;
                row.m = cfg.m;
                row.gamma = cfg.gamma;
                try {
                    cfg.validate();
                    MinimizerResult res = minimize(cfg);
                    row = evaluate_point(res, units.at(cfg.gamma), cfg.eos());
                    row.m = cfg.m;
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                rows[i] = row;
            }
        };
        jobs = std::max(1, jobs);
        std::vector<std::thread> pool;
        for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();

        fs::path csv = dir / "sweep.csv";
        fs::path json = dir / "sweep.json";
        fs::path fits = dir / "fits.csv";
        write_sweep_csv(rows, csv.string());
        write_sweep_json(rows, json.string());
        write_fit_csv(sweep_fits(rows), fits.string());
        man.output(csv.string());
        man.output(json.string());
        man.output(fits.string());

        std::size_t converged = 0;
        for (const SweepPoint& r : rows)
            if (r.converged) ++converged;
        man.add("converged", std::to_string(converged));
        man.write(dir, "ok");
        bool enough = rows.empty() || 10 * converged >= 9 * rows.size();
        if (!enough)
            std::fprintf(stderr, "sweep: only %zu of %zu points converged\n", converged,
                         rows.size());
        return enough ? kOk : kNotConverged;
    } catch (const std::exception& e) {
        man.write(dir, "error", e.what());
        std::fprintf(stderr, "sweep: %s\n", e.what());
        return kUsage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"duet: uniformly rotating star-planet equilibria of the Euler-Poisson system"};
    app.require_subcommand(1);

    auto* le = app.add_subcommand("lane-emden", "Solve radial non-rotating profiles");
    double gamma = 0.0, kpress = 1.0;
    std::vector<double> masses;
    std::string out = "duet-out";
    le->add_option("--gamma", gamma, "adiabatic exponent (> 4/3)")->required();
    le->add_option("--kpress", kpress, "pressure coefficient K");
    le->add_option("--mass", masses, "body mass (repeatable)");
    le->add_option("--out", out, "output directory");

    auto* mi = app.add_subcommand("minimize", "Constrained SCF minimization");
    std::string config_path;
    std::string mi_out = "duet-out";
    mi->add_option("--config", config_path, "flat key-value config file")->required();
    mi->add_option("--out", mi_out, "output directory");

    auto* ve = app.add_subcommand("verify", "Built-in property suites");
    std::string suite = "fast";
    std::string ve_out = "duet-verify";
    std::string inject;
    ve->add_option("--suite", suite, "fast or full")->check(CLI::IsMember({"fast", "full"}));
    ve->add_option("--out", ve_out, "output directory");
    ve->add_option("--inject", inject, "fault injection hook (testing)")->group("");

    auto* swp = app.add_subcommand("sweep", "Parameter sweep with diagnostics");
    std::string sweep_config;
    std::string sweep_out = "duet-sweep";
    int jobs = 1;
    swp->add_option("--config", sweep_config, "config with J/m/gamma lists")->required();
    swp->add_option("--out", sweep_out, "output directory");
    swp->add_option("--jobs", jobs, "concurrent solves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    if (le->parsed()) return cmd_lane_emden(gamma, kpress, masses, out);
    if (mi->parsed()) return cmd_minimize(config_path, mi_out);
    if (ve->parsed()) return cmd_verify(suite, ve_out, inject);
    if (swp->parsed()) return cmd_sweep(sweep_config, sweep_out, jobs);
    return kUsage;
}
