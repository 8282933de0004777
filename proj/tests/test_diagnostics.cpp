#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "duet/diagnostics.hpp"

using namespace duet;

namespace {

GridDensity ball_blob(int n, double h, const Vec3& grid_center, const Vec3& blob_center,
                      double R, double rho0) {
    GridDensity rho(GridGeometry::cube(n, h, grid_center));
    const GridGeometry& g = rho.geom;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double r = norm(g.cell_center(i, j, k) - blob_center);
                if (r < R) rho.values[g.index(i, j, k)] = rho0 * (1.0 - r * r / (R * R));
            }
    return rho;
}

}  // namespace

TEST_SUITE_BEGIN("diagnostics");

TEST_CASE("kepler point-mass energy") {
    CHECK(kepler_argmin(0.25, 1.0) == doctest::Approx(16.0).epsilon(1e-15));
    double mu = 0.21, J = 0.7;
    double eta = kepler_argmin(mu, J);
    CHECK(kepler_energy(eta, mu, J) == doctest::Approx(-mu / (2.0 * eta)).epsilon(1e-13));
    CHECK(std::isinf(kepler_argmin(0.25, 0.0)));
    CHECK_THROWS_AS(kepler_energy(0.0, 0.25, 1.0), std::domain_error);
    CHECK_THROWS_AS(kepler_energy(-1.0, 0.25, 1.0), std::domain_error);
    // J = 0 energy is monotone in d (no interior minimum).
    CHECK(kepler_energy(1.0, mu, 0.0) < kepler_energy(2.0, mu, 0.0));
}

TEST_CASE("g functions") {
    CHECK(g_functions(1.0, 0.0, 1.0, 0.5).g0 == 0.0);
    CHECK(g_functions(0.5, 0.0, 1.0, 0.5).g0 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(g_functions(0.4, 0.01, 1.0, 0.5), std::domain_error);

    // Uniform convergence g_eps -> g0 on [1/2, 3/2], monotone over the
    // tested epsilon ladder.
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        double sup = 0.0;
        for (double z = 0.5; z <= 1.5; z += 1e-3) {
            GPair g = g_functions(z, eps, 1.0, 0.5);
            sup = std::max(sup, std::abs(g.g_eps - g.g0));
        }
        CHECK(sup < prev);
        prev = sup;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("support stats") {
    SUBCASE("single ball") {
        GridDensity rho = ball_blob(32, 0.1, {0, 0, 0}, {0, 0, 0}, 1.2, 1.0);
        SupportStats st = support_stats(rho);
        CHECK(st.component_count == 1);
        CHECK(st.radius >= 1.2 - 2 * 0.1);
        CHECK(st.radius <= 1.2 + 2 * 0.1);
        CHECK(st.linf == doctest::Approx(rho.max_value()));
    }
    SUBCASE("two disjoint balls") {
        GridDensity rho = ball_blob(48, 0.1, {0, 0, 0}, {-1.2, 0, 0}, 0.6, 1.0);
        GridDensity other = ball_blob(48, 0.1, {0, 0, 0}, {1.2, 0, 0}, 0.6, 0.5);
        for (std::size_t c = 0; c < rho.values.size(); ++c) rho.values[c] += other.values[c];
        SupportStats st = support_stats(rho);
        CHECK(st.component_count == 2);
        double gap = 2.4 - 2 * 0.6;  // center distance minus both radii
        CHECK(st.max_gap >= gap - 2 * 0.1);
        CHECK(st.max_gap <= gap + 2 * 0.1);
    }
    SUBCASE("empty patch rejected") {
        GridDensity rho(GridGeometry::cube(8, 0.5, {0, 0, 0}));
        CHECK_THROWS_AS(support_stats(rho), std::domain_error);
    }
}

TEST_CASE("scaling density") {
    PolytropicEos eos(1.0, 2.5);
    RadialProfile unit = solve_unit(eos);
    RadialProfile small = rescale(unit, 0.1);
    GridDensity rho = to_grid(small, 32, small.radius / 12.0, {3.0, -1.0, 0.0});

    GridDensity scaled = scaling_density(rho, 0.1, eos);
    CHECK(scaled.mass() == doctest::Approx(1.0).epsilon(1e-10));
    auto s = eos.scaling_coeffs(0.1);
    CHECK(scaled.geom.h == doctest::Approx(rho.geom.h / s.B).epsilon(1e-14));
    CHECK(scaled.max_value() == doctest::Approx(rho.max_value() * s.A).epsilon(1e-14));
    // Recentering: the output center of mass sits at the origin.
    CHECK(norm(scaled.center_of_mass()) <= 1e-10 * scaled.geom.h * scaled.geom.nx);

    SUBCASE("identity at m = 1") {
        GridDensity id = scaling_density(rho, 1.0, eos);
        CHECK(id.geom.h == rho.geom.h);
        for (std::size_t c = 0; c < rho.values.size(); c += 53)
            CHECK(id.values[c] == rho.values[c]);
    }
    SUBCASE("gamma 2 keeps geometry, scales values by 1/m") {
        PolytropicEos e2(1.0, 2.0);
        GridDensity g2 = scaling_density(rho, 0.25, e2);
        CHECK(g2.geom.h == doctest::Approx(rho.geom.h).epsilon(1e-14));
        CHECK(g2.max_value() == doctest::Approx(rho.max_value() * 4.0).epsilon(1e-14));
    }
    SUBCASE("rejects m <= 0") {
        CHECK_THROWS_AS(scaling_density(rho, 0.0, eos), std::domain_error);
    }
    SUBCASE("scaled small-mass profiles approach the unit minimizer") {
        // || scaled(sigma_m) - sigma ||_L1 decreases along m = 0.2, 0.1, 0.05.
        double prev = std::numeric_limits<double>::infinity();
        for (double m : {0.2, 0.1, 0.05}) {
            RadialProfile pm = rescale(unit, m);
            GridDensity gm = to_grid(pm, 40, pm.radius / 14.0, {0, 0, 0});
            GridDensity sm = scaling_density(gm, m, eos);
            // Compare against the unit profile sampled on the scaled grid.
            KahanSum l1;
            const GridGeometry& gg = sm.geom;
            for (int k = 0; k < gg.nz; ++k)
                for (int j = 0; j < gg.ny; ++j)
                    for (int i = 0; i < gg.nx; ++i)
                        l1.add(std::abs(sm.values[gg.index(i, j, k)] -
                                        unit.density_at(norm(gg.cell_center(i, j, k)))));
            double dist = l1.value() * gg.cell_volume();
            // Pure homology: identical up to interpolation noise; the trend
            // check matters for solver outputs (see acceptance run).
            CHECK(dist < prev + 1e-12);
            prev = dist;
        }
    }
}

TEST_CASE("exponent fit") {
    SUBCASE("exact power law") {
        std::vector<std::pair<double, double>> samples;
        for (double m : {0.05, 0.1, 0.2, 0.5, 1.0}) samples.emplace_back(m, std::pow(m, 1.5));
        PowerFit fit = exponent_fit(samples);
        CHECK(fit.slope == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(fit.residual <= 1e-12);
    }
    SUBCASE("e0 of the radial machinery at gamma 2") {
        PolytropicEos eos(1.0, 2.0);
        RadialProfile unit = solve_unit(eos);
        std::vector<std::pair<double, double>> samples;
        for (double m : {0.05, 0.1, 0.2, 0.5, 1.0})
            samples.emplace_back(m, -energy_by_quadrature(rescale(unit, m)));
        PowerFit fit = exponent_fit(samples);
        CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-3));
    }
    SUBCASE("input validation") {
        std::vector<std::pair<double, double>> two{{0.1, 1.0}, {0.2, 2.0}};
        CHECK_THROWS_AS(exponent_fit(two), std::domain_error);
        std::vector<std::pair<double, double>> neg{{0.1, 1.0}, {0.2, 2.0}, {0.3, -1.0}};
        CHECK_THROWS_AS(exponent_fit(neg), std::domain_error);
    }
}

TEST_CASE("symmetry check") {
    SUBCASE("mirrored input has zero deviation") {
        GridDensity rho = ball_blob(20, 0.2, {0, 0, 0}, {0.3, -0.4, 0}, 1.0, 2.0);
        // Mirror the upper half onto the lower bitwise.
        const GridGeometry& g = rho.geom;
        for (int k = 0; k < g.nz / 2; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    rho.values[g.index(i, j, k)] = rho.values[g.index(i, j, g.nz - 1 - k)];
        SymmetryReport rep = symmetry_check(rho);
        CHECK(rep.mirror_l1 == 0.0);
        CHECK(rep.monotonicity_violation == 0.0);
    }
    SUBCASE("asymmetric input is flagged") {
        GridDensity rho = ball_blob(20, 0.2, {0, 0, 0}, {0, 0, 0.5}, 1.0, 2.0);
        SymmetryReport rep = symmetry_check(rho);
        CHECK(rep.mirror_l1 > 0.1);
    }
    SUBCASE("off-center grid rejected") {
        GridDensity rho(GridGeometry::cube(8, 0.5, {0, 0, 0}));
        rho.geom.origin[2] += 0.17;
        rho.values[0] = 1.0;
        CHECK_THROWS_AS(symmetry_check(rho), std::invalid_argument);
    }
}

TEST_CASE("component shift test on synthetic two-blob planets") {
    PolytropicEos eos(1.0, 2.0);
    double J = 0.5, m = 0.05;
    DomainPair domains = make_domains(J, m);

    // Star: lane-emden body at its ball center.  Planet: two equal parabolic
    // blobs separated along x inside the planet ball.
    RadialProfile unit = solve_unit(eos);
    RadialProfile star = rescale(unit, 1.0 - m);
    double RJ = unit.radius;  // support bound of the scaled planet
    double gamma = eos.gamma();
    double d_star = 32.0 * std::pow(1.0 - m, 5) * std::pow(RJ, 3) *
                    std::pow(m, (12.0 * gamma - 18.0) / (3.0 * gamma - 4.0)) / std::pow(J, 4);

    double gap = 4.0 * d_star;
    double h = gap / 4.0;           // four cells across the gap
    double blob_R = 8.0 * h;        // blobs resolved by 8 cells
    int n = 2 * int(std::ceil((2.0 * blob_R + 0.5 * gap + 6.0 * h) / h));
    Vec3 c = domains.center_planet;
    double off = 0.5 * gap + blob_R;
    GridDensity planet = ball_blob(n, h, c, {c[0] - off, c[1], c[2]}, blob_R, 1.0);
    GridDensity right = ball_blob(n, h, c, {c[0] + off, c[1], c[2]}, blob_R, 1.0);
    for (std::size_t cc = 0; cc < planet.values.size(); ++cc)
        planet.values[cc] += right.values[cc];
    double f = m / planet.mass();
    for (double& v : planet.values) v *= f;

    PatchSystem sys;
    sys.coupling = Coupling::quadrupole;
    sys.patches.push_back({planet, "planet", m});
    double hs = star.radius / 12.0;
    sys.patches.push_back({to_grid(star, 32, hs, domains.center_star), "star", 1.0 - m});

    SUBCASE("zero step is the identity") {
        ShiftRecord rec = component_shift_test(sys, "planet", J, eos, 0.0, RJ);
        REQUIRE(rec.applicable);
        CHECK(rec.dE == 0.0);
        CHECK(rec.com_drift <= 1e-12);
        CHECK(rec.gap == doctest::Approx(gap).epsilon(0.5));
        CHECK(rec.d_star == doctest::Approx(d_star).epsilon(1e-12));
    }
    SUBCASE("approach move above the threshold releases energy") {
        ShiftRecord rec = component_shift_test(sys, "planet", J, eos, 2.0 * h, RJ);
        REQUIRE(rec.applicable);
        CHECK(rec.dE > 0.0);
        CHECK(rec.com_drift <= 1e-12);
        CHECK(rec.h_applied == doctest::Approx(2.0 * h).epsilon(1e-12));
    }
    SUBCASE("single component is skipped") {
        PatchSystem single = sys;
        single.patches[0].density =
            ball_blob(n, h, c, c, blob_R, 1.0);
        double f2 = m / single.patches[0].density.mass();
        for (double& v : single.patches[0].density.values) v *= f2;
        ShiftRecord rec = component_shift_test(single, "planet", J, eos, h, RJ);
        CHECK_FALSE(rec.applicable);
    }
}

TEST_CASE("local minimum probe on a converged run" * doctest::timeout(900)) {
    SolverConfig cfg;
    cfg.J = 0.5;
    cfg.m = 0.2;
    cfg.gamma = 2.0;
    cfg.cells_per_radius = 10;
    cfg.coupling = Coupling::quadrupole;
    cfg.max_iter = 300;
    MinimizerResult res = minimize(cfg);
    REQUIRE(res.converged);
    PolytropicEos eos = cfg.eos();

    ProbeResult probe = local_min_probe(res, eos, 40, 0.1, cfg.cap, 20240817);
    CHECK(probe.trials == 40);
    CHECK(probe.worst_dE >= -1e-4 * std::abs(probe.base_energy));

    // Symmetric pair: at a critical point the sum of opposite-sign probes is
    // second order, so it cannot be strongly negative.
    SymmetryReport sym = symmetry_check(res);
    CHECK(sym.mirror_l1 <= 1e-6);
    CHECK(sym.monotonicity_violation <= 1e-9);

    double ratio = separation_ratio(res);
    CHECK(ratio > 0.9);
    CHECK(ratio < 1.1);

    RadialProfile unit = solve_unit(eos);
    MultiplierCheck mc = multiplier_bound_check(res, unit);
    CHECK(mc.ok);
}

TEST_CASE("separation ratio of seeds is one") {
    PolytropicEos eos(1.0, 2.0);
    SolverConfig cfg;
    cfg.J = 0.5;
    cfg.m = 0.2;
    DomainPair domains = make_domains(cfg.J, cfg.m);
    PatchSystem seed = seed_density(domains, cfg.m, eos, cfg);
    MinimizerResult fake;
    fake.system = seed;
    fake.domains = domains;
    CHECK(separation_ratio(fake) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("multiplier bound check for the unit body") {
    PolytropicEos eos(1.0, 2.0);
    RadialProfile unit = solve_unit(eos);
    SolverConfig cfg;
    cfg.J = 0.0;
    cfg.cells_per_radius = 12;
    MinimizerResult res = minimize(cfg);
    REQUIRE(res.converged);
    MultiplierCheck mc = multiplier_bound_check(res, unit);
    // Single unit body: A = 1, value = lambda_1 = kappa_1 up to grid error.
    CHECK(mc.value == doctest::Approx(unit.lambda).epsilon(0.01));
    CHECK(mc.ok);
    CHECK(mc.margin >= 0.0);
}

TEST_SUITE_END();
