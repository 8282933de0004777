#pragma once

#include <string>
#include <utility>
#include <vector>

#include "duet/eos.hpp"
#include "duet/grid.hpp"

namespace duet {

/// Radial non-rotating minimizer for a polytropic equation of state.
///
/// The Lane-Emden solution theta(xi) is kept as a dense trace of accepted
/// integrator steps; the physical profile is rho(r) = rho_c theta(r/alpha)^n
/// with n = 1/(gamma-1).  Rescaling to another mass only touches alpha and
/// rho_c (homology), so one unit solve serves every mass.
struct RadialProfile {
    PolytropicEos eos;
    double mass = 0.0;
    double radius = 0.0;           // alpha * xi1, the first zero of theta
    double central_density = 0.0;  // rho_c
    double lambda = 0.0;           // Lagrange multiplier, -mass/radius
    double e0 = 0.0;               // minimum energy U - G/2 by radial quadrature
    double u_internal = 0.0;       // U(sigma) alone

    double alpha = 0.0;
    double xi1 = 0.0;
    double dtheta1 = 0.0;  // theta'(xi1) < 0
    std::vector<double> xi, theta, dtheta;  // dense ODE trace

    double theta_at(double x) const;    // cubic Hermite on the trace
    double density_at(double r) const;  // 0 for r >= radius
    double potential_at(double r) const;

    /// 2048 (r, rho) pairs uniform in r on [0, radius].
    std::vector<std::pair<double, double>> samples() const;
};

/// Unit-mass radial minimizer: integrate theta'' + (2/xi) theta' + theta^n = 0
/// to its first zero, map to physical units, rescale to mass 1.
RadialProfile solve_unit(const PolytropicEos& eos);

/// sigma_m(x) = sigma(x/B) / A from the unit profile.
RadialProfile rescale(const RadialProfile& unit, double m);

/// Closed-form multiplier -(5 gamma - 6) m^{(2 gamma - 2)/(3 gamma - 4)} U(sigma).
double lambda_of_mass(const RadialProfile& unit, double m);

/// U - G/2 of the profile by adaptive radial quadrature (recomputed, not cached).
double energy_by_quadrature(const RadialProfile& p);

/// Sample the profile onto an n^3 cube of spacing h centered at `center`;
/// the grid mass is renormalized to profile.mass exactly.
GridDensity to_grid(const RadialProfile& p, int n, double h, const Vec3& center);

/// CSV with one header row `r,rho,V` over the stored samples.
void write_profile_csv(const RadialProfile& p, const std::string& path);

}  // namespace duet
