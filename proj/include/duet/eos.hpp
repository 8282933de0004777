#pragma once

namespace duet {

/// Polytropic equation of state P(s) = K s^gamma, in units G = 1, total mass 1.
///
/// Carries the internal-energy density A(s) = K/(gamma-1) s^gamma, its
/// derivative (the enthalpy) and the inverse of the derivative, plus the
/// homology coefficients that map the unit-mass non-rotating minimizer to
/// mass m.  All members are pure functions over immutable parameters.
class PolytropicEos {
public:
    // Rejects K <= 0 and gamma <= 4/3 (every scaling exponent degenerates
    // at gamma = 4/3, and the variational setup needs gamma > 4/3).
    PolytropicEos(double kpress, double gamma);

    double kpress() const { return kpress_; }
    double gamma() const { return gamma_; }

    // Solver paths require gamma > 3/2; support shrinks with mass only for gamma > 2.
    bool supports_star_planet() const { return gamma_ > 1.5; }
    bool shrinking_planet() const { return gamma_ > 2.0; }

    double pressure(double s) const;     // K s^gamma
    double a_of(double s) const;         // K/(gamma-1) s^gamma
    double a_prime(double s) const;      // K gamma/(gamma-1) s^(gamma-1)
    double a_prime_inv(double y) const;  // ((gamma-1) y / (K gamma))^(1/(gamma-1))

    /// sigma_m(x) = sigma(x/B)/A with A = m^{-2/(3g-4)}, B = m^{(g-2)/(3g-4)}.
    struct Scaling {
        double A;
        double B;
    };
    Scaling scaling_coeffs(double m) const;

    double lane_emden_index() const { return 1.0 / (gamma_ - 1.0); }

private:
    double kpress_;
    double gamma_;
};

}  // namespace duet
