#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "duet/eos.hpp"
#include "duet/field.hpp"
#include "duet/lane_emden.hpp"

namespace duet {

/// The two admissible balls: radius eta/4, centers in the z = 0 plane at
/// separation eta = J^2 / (m(1-m))^2, placed so the point-mass barycenter
/// sits at the origin.
struct DomainPair {
    double eta = 0.0;
    double ball_radius = 0.0;
    Vec3 center_planet{0, 0, 0};
    Vec3 center_star{0, 0, 0};
};

DomainPair make_domains(double J, double m);

enum class SeedKind { lane_emden, uniform };

struct SolverConfig {
    double J = 0.5;
    double m = 0.2;  // planet mass, in (0, 1/2); ignored when J = 0 (single body, mass 1)
    double gamma = 2.0;
    double kpress = 1.0;
    double cap = std::numeric_limits<double>::infinity();  // density cap, or "uncapped"
    double mixing = 0.5;
    double tol_mass = 1e-10;
    double tol_fixedpoint = 1e-7;
    double tol_multiplier = 1e-12;
    int max_iter = 400;
    int cells_per_radius = 16;
    double margin = 1.5;  // patch half-extent over seed radius
    SeedKind seed = SeedKind::lane_emden;
    Coupling coupling = Coupling::monopole;

    PolytropicEos eos() const { return {kpress, gamma}; }
    void validate() const;
};

/// Raised when the seed profile cannot fit inside its ball; carries the
/// feasible-parameter hint.
struct InfeasibleGeometry : std::runtime_error {
    double min_feasible_J;
    double max_feasible_m;
    InfeasibleGeometry(const std::string& what, double minJ, double maxm)
        : std::runtime_error(what), min_feasible_J(minJ), max_feasible_m(maxm) {}
};

/// Raised for parameter ranges the solver does not model (gamma <= 3/2).
struct UnsupportedPhysics : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when the density cap cannot hold the target mass inside the ball.
struct InfeasibleCap : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ElResidual {
    double active = 0.0;  // sup |A'(rho) - [Phi + lambda]_+| where rho > threshold
    double slack = 0.0;   // sup [Phi + lambda]_+ where rho = 0
    double total() const { return std::max(active, slack); }
};

struct MinimizerResult {
    PatchSystem system;
    DomainPair domains;  // eta = 0 for single-body runs
    double J = 0.0;
    std::vector<double> multipliers;
    EnergyBreakdown breakdown;
    int iterations = 0;
    bool converged = false;
    std::vector<double> mass_errors;
    std::vector<ElResidual> el_residuals;
    double change = 0.0;  // final fixed-point change metric
    std::vector<double> change_history;
    double seed_energy = 0.0;
    // Barycenter-servo gauge field at the solution (enforces the xbar = 0
    // normalization of the admissible class) and the bound it contributes
    // to the Euler-Lagrange residual against the gauge-free field.
    Vec3 servo_tilt{0, 0, 0};
    double gauge_bound = 0.0;
};

/// Feasible initial system: Lane-Emden profiles at the ball centers by
/// default, or the uniform ball of radius eta/8 and density 384 m/(pi eta^3).
PatchSystem seed_density(const DomainPair& domains, double m, const PolytropicEos& eos,
                         const SolverConfig& config);

/// Phi = V_rho + (J^2/(2 I^2)) r^2(x - xbar) on every cell of every patch,
/// with cross-patch far-field terms and system-wide xbar, I.
std::vector<GridField> effective_potential(const PatchSystem& sys, double J);

/// Finds lambda such that the capped Euler-Lagrange update has the target
/// mass; the mapped mass is nondecreasing in lambda, so bisection converges.
/// Cells excluded from the admissible region carry Phi = -inf.
std::pair<double, GridDensity> solve_multiplier(const GridField& phi, double target_mass,
                                                const PolytropicEos& eos, double cap,
                                                double tol_multiplier);

struct ScfStep {
    PatchSystem system;
    std::vector<double> multipliers;
    double change = 0.0;
};

/// One damped Picard step on the Euler-Lagrange map with every grid cell
/// admissible; minimize() applies the per-ball masks on top of this.
ScfStep scf_step(const PatchSystem& sys, double J, const PolytropicEos& eos,
                 const SolverConfig& config);

MinimizerResult minimize(const SolverConfig& config);

std::vector<ElResidual> el_residual(const MinimizerResult& result, const PolytropicEos& eos,
                                    double cap);

/// Discrete residual of the reduced Euler-Poisson balance
/// grad P(rho) = rho grad V + omega^2 rho P12(x - xbar),
/// L2 over interior support cells (2h from the free boundary), normalized
/// by ||rho grad V||; the largest patch value is returned.
double ep_residual(const MinimizerResult& result, const PolytropicEos& eos);
double ep_residual_single(const PatchSystem& sys, std::size_t patch_index, double J,
                          const PolytropicEos& eos);

}  // namespace duet
