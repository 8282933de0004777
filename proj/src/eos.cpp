#include "duet/eos.hpp"

#include <cmath>
#include <stdexcept>

namespace duet {

PolytropicEos::PolytropicEos(double kpress, double gamma) : kpress_(kpress), gamma_(gamma) {
    if (!(kpress > 0.0)) throw std::invalid_argument("eos: K must be positive");
    if (!(gamma > 4.0 / 3.0)) throw std::invalid_argument("eos: gamma must exceed 4/3");
}

double PolytropicEos::pressure(double s) const {
    if (s < 0.0) throw std::domain_error("eos: negative density");
    return kpress_ * std::pow(s, gamma_);
}

double PolytropicEos::a_of(double s) const {
    if (s < 0.0) throw std::domain_error("eos: negative density");
    return kpress_ / (gamma_ - 1.0) * std::pow(s, gamma_);
}

double PolytropicEos::a_prime(double s) const {
    if (s < 0.0) throw std::domain_error("eos: negative density");
    return kpress_ * gamma_ / (gamma_ - 1.0) * std::pow(s, gamma_ - 1.0);
}

double PolytropicEos::a_prime_inv(double y) const {
    if (y < 0.0) {
        // Positive-part convention: absorb floating-point dust below zero.
        if (y > -1e-14) return 0.0;
        throw std::domain_error("eos: a_prime_inv of negative value");
    }
    return std::pow((gamma_ - 1.0) * y / (kpress_ * gamma_), 1.0 / (gamma_ - 1.0));
}

PolytropicEos::Scaling PolytropicEos::scaling_coeffs(double m) const {
    if (!(m > 0.0)) throw std::domain_error("eos: scaling requires m > 0");
    double denom = 3.0 * gamma_ - 4.0;
    return {std::pow(m, -2.0 / denom), std::pow(m, (gamma_ - 2.0) / denom)};
}

}  // namespace duet
