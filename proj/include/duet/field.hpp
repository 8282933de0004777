#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "duet/eos.hpp"
#include "duet/grid.hpp"

namespace duet {

enum class Coupling { monopole, quadrupole };

/// One body of a star-planet system on its own grid patch.
struct Patch {
    GridDensity density;
    std::string label;  // "planet" or "star"
    double target_mass = 0.0;
};

/// Two (or more) widely separated patches coupled through a far-field
/// expansion; the decomposition E_J = sum of per-body energies minus the
/// cross interaction plus the rotational term lives here.
struct PatchSystem {
    std::vector<Patch> patches;
    Coupling coupling = Coupling::monopole;

    void validate() const;  // pairwise disjoint bounding boxes, labels set
    const Patch& by_label(const std::string& label) const;
};

struct EnergyBreakdown {
    double U = 0.0;       // internal energy, integral of A(rho)
    double Gself = 0.0;   // total interaction energy G(rho, rho)
    double Ginter = 0.0;  // cross term G(rho_m, rho_{1-m}) when two bodies exist
    double TJ = 0.0;      // J^2 / (2 I)
    double EJ = 0.0;      // U - Gself/2 + TJ
    double I = 0.0;       // moment of inertia about e_z through the center of mass
    Vec3 xbar{0.0, 0.0, 0.0};
    std::vector<double> masses;
};

/// Free-space gravitational potential of a grid density by zero-padded
/// cyclic convolution with the cell-averaged Newtonian kernel.
GridField potential(const GridDensity& rho);

/// Same potential by direct O(N^2) summation; the oracle for the transform.
GridField potential_direct(const GridDensity& rho);

/// Average of 1/|u| over a unit cube centered at the origin (self-cell kernel).
double self_cell_kernel_unit();

/// Multipole moments of a patch about its center of mass.
struct Multipole {
    double mass = 0.0;
    Vec3 com{0.0, 0.0, 0.0};
    double quad[6] = {0, 0, 0, 0, 0, 0};  // traceless Q_xx Q_yy Q_zz Q_xy Q_xz Q_yz
    double radius = 0.0;                  // support radius about com

    static Multipole of(const GridDensity& rho);
    double eval(const Vec3& point, Coupling order) const;
    Vec3 grad(const Vec3& point, Coupling order) const;
    double error_bound(const Vec3& point, Coupling order) const;  // O((R/d)^{p+1}) m/d
};

/// Far-field potential of a patch at points outside its inflated bounding box.
std::vector<double> potential_at_external(const GridDensity& rho, std::span<const Vec3> points,
                                          Coupling order);

/// (I, xbar) of a single density or a whole system; I uses r^2 = x1^2 + x2^2
/// about the axis through the center of mass.
std::pair<double, Vec3> moment_of_inertia(const GridDensity& rho);
std::pair<double, Vec3> moment_of_inertia(const PatchSystem& sys);

EnergyBreakdown energies(const GridDensity& rho, double J, const PolytropicEos& eos);
EnergyBreakdown energies(const PatchSystem& sys, double J, const PolytropicEos& eos);

/// G(a, b) = integral of V_a * b for two densities on one grid.
double interaction_energy(const GridDensity& a, const GridDensity& b);

/// Symmetrized cross interaction between two separated patches via multipoles.
double interaction_energy_far(const GridDensity& a, const GridDensity& b, Coupling order);

/// Discrete check of ||f||_r <= ||f||_p^alpha ||f||_q^(1-alpha).
bool interpolation_check(const GridDensity& rho, double p, double r, double q);

/// k ||rho||_1^(2/3) ||rho||_inf^(1/3) with k = (3/2)(4 pi)^(1/3).
double potential_sup_bound(const GridDensity& rho);

}  // namespace duet
