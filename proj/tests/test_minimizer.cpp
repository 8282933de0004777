#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "duet/minimizer.hpp"

using namespace duet;

namespace {
constexpr double kPi = 3.14159265358979323846;

SolverConfig coarse_config(double J, double m, double gamma) {
    SolverConfig cfg;
    cfg.J = J;
    cfg.m = m;
    cfg.gamma = gamma;
    cfg.cells_per_radius = 10;
    cfg.coupling = Coupling::quadrupole;
    cfg.max_iter = 300;
    return cfg;
}

// 90-degree rotation about e_z: (x, y) -> (-y, x), cell (i,j,k) -> (n-1-j, i, k).
GridDensity rot90(const GridDensity& rho) {
    const GridGeometry& g = rho.geom;
    Vec3 center{g.origin[0] + 0.5 * (g.nx - 1) * g.h, g.origin[1] + 0.5 * (g.ny - 1) * g.h,
                g.origin[2] + 0.5 * (g.nz - 1) * g.h};
    GridDensity out(GridGeometry::cube(g.nx, g.h, {-center[1], center[0], center[2]}));
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                out.values[out.geom.index(g.nx - 1 - j, i, k)] = rho.values[g.index(i, j, k)];
    return out;
}
}  // namespace

TEST_SUITE_BEGIN("minimizer");

TEST_CASE("domain pair geometry") {
    DomainPair d = make_domains(1.0, 0.5);
    CHECK(d.eta == doctest::Approx(16.0).epsilon(1e-15));
    CHECK(d.ball_radius == doctest::Approx(4.0).epsilon(1e-15));
    double dist = norm(d.center_planet - d.center_star) - 2.0 * d.ball_radius;
    CHECK(dist == doctest::Approx(8.0).epsilon(1e-14));
    Vec3 bary = 0.5 * d.center_planet + 0.5 * d.center_star;
    CHECK(norm(bary) <= 1e-14);
    CHECK(d.center_planet[2] == 0.0);
    CHECK(d.center_star[2] == 0.0);

    CHECK(make_domains(2.0, 0.5).eta == doctest::Approx(64.0).epsilon(1e-15));
    CHECK(make_domains(1.0, 1e-4).eta > 1e7);  // eta -> infinity as m -> 0
    CHECK_THROWS_AS(make_domains(0.0, 0.2), std::domain_error);
    CHECK_THROWS_AS(make_domains(1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(make_domains(1.0, 1.0), std::domain_error);
}

TEST_CASE("config validation") {
    SolverConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    SolverConfig bad = cfg;
    bad.m = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.gamma = 1.45;
    CHECK_THROWS_AS(bad.validate(), UnsupportedPhysics);
    bad = cfg;
    bad.mixing = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.cells_per_radius = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    // A finite cap must exceed the nonemptiness threshold 384/(pi eta^3).
    bad = cfg;
    bad.cap = 1e-12;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("seed densities") {
    PolytropicEos eos(1.0, 2.0);
    SolverConfig cfg = coarse_config(0.5, 0.2, 2.0);
    DomainPair domains = make_domains(cfg.J, cfg.m);

    SUBCASE("uniform fallback arithmetic and exact masses") {
        // (4/3) pi (eta/8)^3 * 384 m / (pi eta^3) = m identically.
        double eta = domains.eta;
        double vol = 4.0 / 3.0 * kPi * std::pow(eta / 8.0, 3);
        CHECK(vol * 384.0 * cfg.m / (kPi * std::pow(eta, 3)) ==
              doctest::Approx(cfg.m).epsilon(1e-14));

        SolverConfig ucfg = cfg;
        ucfg.seed = SeedKind::uniform;
        PatchSystem sys = seed_density(domains, cfg.m, eos, ucfg);
        CHECK(sys.by_label("planet").density.mass() == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(sys.by_label("star").density.mass() == doctest::Approx(0.8).epsilon(1e-14));
        double threshold = 384.0 / (kPi * std::pow(eta, 3));
        CHECK(sys.by_label("star").density.max_value() <= threshold * (1.0 - cfg.m) * 1.01);
    }

    SUBCASE("lane-emden seed masses exact") {
        PatchSystem sys = seed_density(domains, cfg.m, eos, cfg);
        CHECK(sys.by_label("planet").density.mass() == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(sys.by_label("star").density.mass() == doctest::Approx(0.8).epsilon(1e-14));
        CHECK_NOTHROW(sys.validate());
    }

    SUBCASE("infeasible geometry reports hints") {
        try {
            seed_density(make_domains(0.05, 0.2), 0.2, eos, cfg);
            FAIL("expected InfeasibleGeometry");
        } catch (const InfeasibleGeometry& e) {
            CHECK(e.min_feasible_J > 0.05);
            CHECK(e.max_feasible_m >= 0.0);
        }
    }
}

TEST_CASE("effective potential") {
    PolytropicEos eos(1.0, 2.0);
    SUBCASE("J = 0 single ball reduces to the bare potential") {
        RadialProfile unit = solve_unit(eos);
        PatchSystem sys;
        sys.patches.push_back({to_grid(unit, 24, unit.radius / 10.0, {0, 0, 0}), "star", 1.0});
        std::vector<GridField> phi = effective_potential(sys, 0.0);
        GridField V = potential(sys.patches[0].density);
        for (std::size_t c = 0; c < V.values.size(); c += 97)
            CHECK(phi[0].values[c] == doctest::Approx(V.values[c]).epsilon(1e-14));
    }
    SUBCASE("far star contributes its monopole") {
        PatchSystem sys;
        GridDensity planet(GridGeometry::cube(8, 0.25, {0, 0, 0}));
        planet.values[planet.geom.index(3, 3, 3)] = 1.0;
        GridDensity star(GridGeometry::cube(8, 0.25, {30, 0, 0}));
        star.values[star.geom.index(3, 3, 3)] = 8.0;
        double ms = star.mass();
        sys.patches.push_back({planet, "planet", planet.mass()});
        sys.patches.push_back({star, "star", ms});
        std::vector<GridField> phi = effective_potential(sys, 0.0);
        GridField own = potential(sys.patches[0].density);
        Vec3 xs = sys.patches[1].density.center_of_mass();
        const GridGeometry& g = sys.patches[0].density.geom;
        for (int i = 0; i < g.nx; i += 3) {
            std::size_t c = g.index(i, 3, 3);
            double d = norm(g.cell_center(i, 3, 3) - xs);
            CHECK(phi[0].values[c] - own.values[c] == doctest::Approx(ms / d).epsilon(1e-6));
        }
    }
    SUBCASE("invariant under rotating the whole system about e_z") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.1, 1.0);
        GridDensity a(GridGeometry::cube(10, 0.3, {6, 0, 0}));
        GridDensity b(GridGeometry::cube(10, 0.3, {-6, 0, 0}));
        for (std::size_t c = 0; c < a.values.size(); ++c) {
            a.values[c] = u(rng);
            b.values[c] = 1.3 * u(rng);
        }
        PatchSystem sys;
        sys.patches.push_back({a, "planet", a.mass()});
        sys.patches.push_back({b, "star", b.mass()});
        std::vector<GridField> phi = effective_potential(sys, 0.7);

        PatchSystem rsys;
        rsys.patches.push_back({rot90(a), "planet", a.mass()});
        rsys.patches.push_back({rot90(b), "star", b.mass()});
        std::vector<GridField> rphi = effective_potential(rsys, 0.7);
        const GridGeometry& g = a.geom;
        double vmax = 0.0, dmax = 0.0;
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    double v0 = phi[0].values[g.index(i, j, k)];
                    double v1 = rphi[0].values[g.index(g.nx - 1 - j, i, k)];
                    vmax = std::max(vmax, std::abs(v0));
                    dmax = std::max(dmax, std::abs(v0 - v1));
                }
        CHECK(dmax <= 1e-10 * vmax);
    }
    SUBCASE("zero mass rejected") {
        PatchSystem sys;
        sys.patches.push_back({GridDensity(GridGeometry::cube(6, 0.5, {0, 0, 0})), "star", 1.0});
        CHECK_THROWS_AS(effective_potential(sys, 0.5), std::domain_error);
    }
}

TEST_CASE("solve_multiplier") {
    PolytropicEos eos(1.0, 2.0);
    GridGeometry g = GridGeometry::cube(10, 0.5, {0, 0, 0});

    SUBCASE("constant field closed form at gamma 2") {
        GridField phi(g, 3.0);
        double vol = g.cell_volume() * double(g.size());
        double target = 0.7;
        auto [lambda, rho] = solve_multiplier(phi, target, eos,
                                              std::numeric_limits<double>::infinity(), 1e-13);
        // a_prime_inv(y) = y/2, so rho = (c + lambda)/2 and lambda = 2 t / V - c.
        CHECK(lambda == doctest::Approx(2.0 * target / vol - 3.0).epsilon(1e-10));
        CHECK(rho.mass() == doctest::Approx(target).epsilon(1e-10));
    }
    SUBCASE("vanishing target pushes lambda to -sup Phi") {
        GridField phi(g, 0.0);
        for (std::size_t c = 0; c < phi.values.size(); ++c) phi.values[c] = 0.1 * double(c % 7);
        for (double t : {1e-6, 1e-9, 1e-12}) {
            auto [lambda, rho] = solve_multiplier(phi, t, eos,
                                                  std::numeric_limits<double>::infinity(), 1e-12);
            CHECK(lambda < -0.4);  // sup Phi = 0.6
            CHECK(rho.mass() == doctest::Approx(t).epsilon(1e-9));
        }
    }
    SUBCASE("inactive cap leaves the multiplier unchanged") {
        GridField phi(g, 0.0);
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(0.0, 2.0);
        for (double& v : phi.values) v = u(rng);
        auto [l1, r1] = solve_multiplier(phi, 0.5, eos, 1e9, 1e-13);
        auto [l2, r2] = solve_multiplier(phi, 0.5, eos, 2e9, 1e-13);
        CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    }
    SUBCASE("mapped mass is nondecreasing in lambda") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(0.0, 1.5);
        GridField phi(g, 0.0);
        for (double& v : phi.values) v = u(rng);
        double cap = 0.8;
        auto mass_of = [&](double lambda) {
            KahanSum s;
            for (double v : phi.values)
                s.add(std::min(eos.a_prime_inv(std::max(v + lambda, 0.0)), cap));
            return s.value() * g.cell_volume();
        };
        double prev = -1.0;
        for (double lambda = -2.0; lambda <= 2.0; lambda += 0.05) {
            double m = mass_of(lambda);
            CHECK(m >= prev - 1e-15);
            prev = m;
        }
    }
    SUBCASE("cap too small is an infeasible-cap error") {
        GridField phi(g, 1.0);
        CHECK_THROWS_AS(solve_multiplier(phi, 1e9, eos, 1e-3, 1e-12), InfeasibleCap);
    }
}

TEST_CASE("scf step") {
    PolytropicEos eos(1.0, 2.0);
    SUBCASE("lane-emden seed is nearly a fixed point at 48 cells") {
        RadialProfile unit = solve_unit(eos);
        PatchSystem sys;
        sys.patches.push_back({to_grid(unit, 48, unit.radius / 16.0, {0, 0, 0}), "star", 1.0});
        SolverConfig cfg;
        cfg.mixing = 1.0;
        ScfStep step = scf_step(sys, 0.0, eos, cfg);
        CHECK(step.change < 0.02);  // discretization-limited
    }
    SUBCASE("mixing theta = 1 reproduces the raw update") {
        RadialProfile unit = solve_unit(eos);
        PatchSystem sys;
        sys.patches.push_back({to_grid(unit, 20, unit.radius / 8.0, {0, 0, 0}), "star", 1.0});
        SolverConfig cfg;
        cfg.mixing = 1.0;
        ScfStep step = scf_step(sys, 0.0, eos, cfg);
        std::vector<GridField> phi = effective_potential(sys, 0.0);
        auto [lambda, raw] = solve_multiplier(phi[0], 1.0, eos, cfg.cap, cfg.tol_multiplier);
        double f = 1.0 / raw.mass();
        double dmax = 0.0;
        for (std::size_t c = 0; c < raw.values.size(); ++c)
            dmax = std::max(dmax, std::abs(step.system.patches[0].density.values[c] -
                                           raw.values[c] * f));
        CHECK(dmax <= 1e-14);
        CHECK(step.multipliers[0] == doctest::Approx(lambda).epsilon(1e-14));
    }
}

TEST_CASE("minimize: non-rotating gold case" * doctest::timeout(300)) {
    SolverConfig cfg;
    cfg.J = 0.0;
    cfg.gamma = 2.0;
    cfg.cells_per_radius = 16;
    MinimizerResult res = minimize(cfg);
    REQUIRE(res.converged);
    CHECK(res.mass_errors[0] <= cfg.tol_mass);
    CHECK(res.multipliers[0] < 0.0);

    PolytropicEos eos(1.0, 2.0);
    RadialProfile unit = solve_unit(eos);
    const GridDensity& rho = res.system.patches[0].density;
    GridDensity ref = to_grid(unit, rho.geom.nx, rho.geom.h, {0, 0, 0});
    KahanSum diff;
    for (std::size_t c = 0; c < rho.values.size(); ++c)
        diff.add(std::abs(rho.values[c] - ref.values[c]));
    CHECK(diff.value() * rho.geom.cell_volume() < 0.02);
    CHECK(res.multipliers[0] == doctest::Approx(unit.lambda).epsilon(0.01));
    CHECK(ep_residual(res, eos) < 0.05);  // hydrostatic balance at omega = 0
}

TEST_CASE("minimize: rotating two-body run" * doctest::timeout(900)) {
    SolverConfig cfg = coarse_config(0.5, 0.2, 2.0);
    PolytropicEos eos = cfg.eos();
    MinimizerResult res = minimize(cfg);
    REQUIRE(res.converged);

    SUBCASE("contracts: masses, multipliers, descent, residual gates") {
        CHECK(res.mass_errors[0] <= cfg.tol_mass);
        CHECK(res.mass_errors[1] <= cfg.tol_mass);
        for (double lam : res.multipliers) CHECK(lam < 0.0);
        CHECK(res.breakdown.EJ < res.seed_energy);
        for (std::size_t p = 0; p < res.multipliers.size(); ++p)
            CHECK(res.el_residuals[p].total() <=
                  10.0 * cfg.tol_fixedpoint * std::abs(res.multipliers[p]));
    }

    SUBCASE("supports stay inside the balls") {
        for (const Patch& p : res.system.patches) {
            Vec3 center = p.label == "planet" ? res.domains.center_planet
                                              : res.domains.center_star;
            const GridGeometry& g = p.density.geom;
            for (int k = 0; k < g.nz; ++k)
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i)
                        if (p.density.values[g.index(i, j, k)] > 0.0)
                            CHECK(norm(g.cell_center(i, j, k) - center) <=
                                  res.domains.ball_radius);
        }
    }

    SUBCASE("cap stays inactive for generous caps") {
        double linf = std::max(res.system.patches[0].density.max_value(),
                               res.system.patches[1].density.max_value());
        SolverConfig capped = cfg;
        capped.cap = 2.0 * linf;
        MinimizerResult cres = minimize(capped);
        REQUIRE(cres.converged);
        CHECK(cres.system.patches[0].density.max_value() < capped.cap * 0.99);
        CHECK(cres.system.patches[1].density.max_value() < capped.cap * 0.99);
        CHECK(cres.breakdown.EJ == doctest::Approx(res.breakdown.EJ).epsilon(1e-6));
    }

    SUBCASE("energy exceeds the paper's lower bound chain") {
        // E_J > E0(rho_star) + (B^3/A^gamma) E0(scaled planet) - Ginter.
        const GridDensity& planet = res.system.by_label("planet").density;
        const GridDensity& star = res.system.by_label("star").density;
        double e0_star = energies(star, 0.0, eos).EJ;
        double e0_planet = energies(planet, 0.0, eos).EJ;
        auto s = eos.scaling_coeffs(0.2);
        double scale = std::pow(s.B, 3) / std::pow(s.A, eos.gamma());
        GridDensity scaled = planet;
        scaled.geom.h = planet.geom.h / s.B;
        Vec3 xb = planet.center_of_mass();
        scaled.geom.origin = (1.0 / s.B) * (planet.geom.origin - xb);
        for (double& v : scaled.values) v *= s.A;
        double e0_scaled = energies(scaled, 0.0, eos).EJ;
        CHECK(e0_planet == doctest::Approx(scale * e0_scaled).epsilon(1e-10));
        CHECK(res.breakdown.EJ > e0_star + scale * e0_scaled - res.breakdown.Ginter);
    }
}

TEST_CASE("minimize is deterministic" * doctest::timeout(300)) {
    SolverConfig cfg = coarse_config(0.5, 0.1, 2.0);
    cfg.cells_per_radius = 8;
    MinimizerResult a = minimize(cfg);
    MinimizerResult b = minimize(cfg);
    REQUIRE(a.system.patches.size() == b.system.patches.size());
    CHECK(a.iterations == b.iterations);
    CHECK(a.breakdown.EJ == b.breakdown.EJ);
    for (std::size_t p = 0; p < a.multipliers.size(); ++p)
        CHECK(a.multipliers[p] == b.multipliers[p]);
    for (std::size_t c = 0; c < a.system.patches[0].density.values.size(); ++c)
        CHECK(a.system.patches[0].density.values[c] == b.system.patches[0].density.values[c]);
}

TEST_CASE("el_residual slack side") {
    // A zero planet patch whose Phi + lambda stays nonpositive has zero
    // residual on the complementary-slackness side.
    PolytropicEos eos(1.0, 2.0);
    RadialProfile unit = solve_unit(eos);
    MinimizerResult res;
    res.J = 0.0;
    res.domains.ball_radius = std::numeric_limits<double>::infinity();
    PatchSystem sys;
    sys.patches.push_back({to_grid(unit, 20, unit.radius / 8.0, {0, 0, 0}), "star", 1.0});
    GridDensity zero(GridGeometry::cube(8, 0.5, {40, 0, 0}));
    sys.patches.push_back({zero, "planet", 1e-6});
    res.system = sys;
    res.multipliers = {unit.lambda, -10.0};  // far below -sup Phi on the planet patch
    std::vector<ElResidual> r = el_residual(res, eos, std::numeric_limits<double>::infinity());
    CHECK(r[1].slack == 0.0);
    CHECK(r[1].active == 0.0);
}

TEST_CASE("ep_residual: analytic solution and Richardson rate" * doctest::timeout(600)) {
    PolytropicEos eos(1.0, 2.0);
    RadialProfile unit = solve_unit(eos);
    auto residual_at = [&](int n, int cpr) {
        PatchSystem sys;
        sys.patches.push_back({to_grid(unit, n, unit.radius / cpr, {0, 0, 0}), "star", 1.0});
        return ep_residual_single(sys, 0, 0.0, eos);
    };
    double r48 = residual_at(48, 16);
    double r96 = residual_at(96, 32);
    CHECK(r48 <= 0.05);
    CHECK(r48 / r96 >= 1.7);
}

TEST_SUITE_END();
