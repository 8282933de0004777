#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duet/minimizer.hpp"

namespace duet {

/// Two-point-mass energy -mu/d + J^2/(2 mu d^2) and its minimizing separation
/// eta = J^2/mu^2 (+inf sentinel when J = 0).
double kepler_energy(double d, double mu, double J);
double kepler_argmin(double mu, double J);

/// The comparison functions of the center-of-mass separation estimate;
/// g_eps -> g0 uniformly on z >= 1/2 as eps -> 0, and g0(1) = 0.
struct GPair {
    double g_eps;
    double g0;
};
GPair g_functions(double z, double eps, double R, double J);

/// |xbar(planet) - xbar(star)| / eta for a converged two-body result.
double separation_ratio(const MinimizerResult& result);

struct SupportStats {
    double radius = 0.0;      // max distance from xbar to an occupied cell center
    int component_count = 0;  // 6-connectivity flood fill
    double max_gap = 0.0;     // largest hull distance between distinct components
    double linf = 0.0;
};
/// floor < 0 selects the default 1e-9 * max value.
SupportStats support_stats(const GridDensity& patch, double floor = -1.0);

/// rho_tilde(x) = A rho(Bx): values scaled by A, spacing by 1/B, recentered
/// on the center of mass; output has unit mass.
GridDensity scaling_density(const GridDensity& rho_m, double m, const PolytropicEos& eos);

struct MultiplierCheck {
    bool ok = false;
    double value = 0.0;   // A(m)^(gamma-1) lambda_m
    double bound = 0.0;   // kappa_1 + 0.1 |kappa_1|
    double margin = 0.0;  // bound - value (>= 0 when ok)
};
MultiplierCheck multiplier_bound_check(const MinimizerResult& result,
                                       const RadialProfile& unit_profile);

struct ShiftRecord {
    bool applicable = false;  // the patch splits into exactly 2 components
    double gap = 0.0;         // hull distance between the two components
    double dE = 0.0;          // E_J(original) - E_J(shifted)
    double d_star = 0.0;      // 32 (1-m)^5 R(J)^3 m^{(12g-18)/(3g-4)} / J^4
    double com_drift = 0.0;   // |xbar(moved pair) - xbar(original)|
    double h_applied = 0.0;   // cell-quantized approach distance
    double m1 = 0.0, m2 = 0.0;
};

/// Mass-weighted approach move of a two-component patch: the components move
/// toward each other by h1, h2 with h1 m1 = h2 m2, h1 + h2 = h_step, and the
/// energy difference is recomputed exactly.
ShiftRecord component_shift_test(const PatchSystem& sys, const std::string& label, double J,
                                 const PolytropicEos& eos, double h_step, double RJ);

struct ProbeResult {
    double worst_dE = 0.0;  // min over trials of E_J(rho + bump) - E_J(rho)
    double base_energy = 0.0;
    int trials = 0;
    int rejected = 0;
};

/// Random zero-mass truncated-cosine bump pairs inside the support; feasible
/// draws only (0 <= rho + bump <= cap, support inside the ball).
ProbeResult local_min_probe(const MinimizerResult& result, const PolytropicEos& eos, int trials,
                            double radius_frac, double cap, std::uint64_t rng_seed);

struct SymmetryReport {
    double mirror_l1 = 0.0;                // ||rho(z) - rho(-z)||_1 / ||rho||_1
    double monotonicity_violation = 0.0;   // max positive jump along |z|, / ||rho||_inf
};
SymmetryReport symmetry_check(const GridDensity& rho, double floor = -1.0);
SymmetryReport symmetry_check(const MinimizerResult& result);

struct PowerFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms of log residuals
};
PowerFit exponent_fit(const std::vector<std::pair<double, double>>& samples);

/// One row of a parameter sweep: solver outcome plus the paper-law
/// measurements used by the rate checks.
struct SweepPoint {
    double J = 0.0, m = 0.0, gamma = 0.0;
    bool converged = false;
    int iterations = 0;
    double EJ = 0.0, U = 0.0, Gself = 0.0, Ginter = 0.0, TJ = 0.0, I = 0.0;
    double lambda_planet = 0.0, lambda_star = 0.0;
    double planet_radius = 0.0, star_radius = 0.0;
    double planet_linf = 0.0, star_linf = 0.0;
    int planet_components = 0, star_components = 0;
    double planet_max_gap = 0.0, star_max_gap = 0.0;
    double d_over_eta = 0.0;
    double g_eps_at_ratio = 0.0;
    double e0_planet = 0.0, e0_star = 0.0;  // per-component grid E0
    double scaled_planet_e0 = 0.0;          // E0 of the rescaled planet density
    bool multiplier_ok = false;
    double multiplier_margin = 0.0;
    double boundary_clearance = 0.0;  // dist(support, ball boundary)
    std::string error;
};

SweepPoint evaluate_point(const MinimizerResult& result, const RadialProfile& unit_profile,
                          const PolytropicEos& eos);

struct FitRow {
    double gamma = 0.0, J = 0.0;
    std::string quantity;
    double slope = 0.0, expected = 0.0, residual = 0.0;
    int count = 0;
};

/// Log-log rate fits per (gamma, J) group; converged points only, at least
/// three masses spanning a factor of four.
std::vector<FitRow> sweep_fits(const std::vector<SweepPoint>& points);

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);
void write_sweep_json(const std::vector<SweepPoint>& points, const std::string& path);
void write_fit_csv(const std::vector<FitRow>& rows, const std::string& path);

}  // namespace duet
