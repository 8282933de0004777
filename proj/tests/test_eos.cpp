#include <cmath>
#include <random>

#include <stdexcept>

#include "doctest.h"
#include "duet/eos.hpp"

using namespace duet;

namespace {

// Numeric quadrature of the defining integral A(s) = s * int_0^s P(tau)/tau^2,
// independent of the closed form under test.  tanh-sinh nodes handle the
// integrable endpoint singularity tau^(gamma-2).
double a_by_quadrature(const PolytropicEos& eos, double s) {
    if (s == 0.0) return 0.0;
    const double pi = 3.14159265358979323846;
    const double h = 0.01;
    double acc = 0.0;
    for (int k = -600; k <= 600; ++k) {
        double t = k * h;
        double sh = 0.5 * pi * std::sinh(t);
        double x = 0.5 * s * (1.0 + std::tanh(sh));
        double w = 0.5 * s * (0.5 * pi * std::cosh(t)) / std::pow(std::cosh(sh), 2) * h;
        if (x <= 0.0 || x >= s || w == 0.0) continue;
        acc += w * eos.pressure(x) / (x * x);
    }
    return s * acc;
}

}  // namespace

TEST_SUITE_BEGIN("eos");

TEST_CASE("construction rejects bad parameters") {
    CHECK_THROWS_AS(PolytropicEos(0.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(PolytropicEos(-1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(PolytropicEos(1.0, 4.0 / 3.0), std::invalid_argument);
    CHECK_THROWS_AS(PolytropicEos(1.0, 1.2), std::invalid_argument);
    PolytropicEos ok(1.0, 1.4);
    CHECK_FALSE(ok.supports_star_planet());
    CHECK(PolytropicEos(1.0, 1.6).supports_star_planet());
    CHECK_FALSE(PolytropicEos(1.0, 2.0).shrinking_planet());
    CHECK(PolytropicEos(1.0, 2.5).shrinking_planet());
}

TEST_CASE("pressure examples") {
    CHECK(PolytropicEos(1, 2).pressure(0.0) == 0.0);
    CHECK(PolytropicEos(1, 2).pressure(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(PolytropicEos(2, 1.8).pressure(3.0) ==
          doctest::Approx(2.0 * std::pow(3.0, 1.8)).epsilon(1e-15));
    CHECK_THROWS_AS(PolytropicEos(1, 2).pressure(-1e-3), std::domain_error);
}

TEST_CASE("a_of examples and quadrature oracle") {
    CHECK(PolytropicEos(1, 2).a_of(0.0) == 0.0);
    CHECK(PolytropicEos(1, 2).a_of(2.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK_THROWS_AS(PolytropicEos(1, 2).a_of(-1.0), std::domain_error);

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uk(0.5, 3.0), ug(1.5, 2.8), us(0.1, 5.0);
    for (int trial = 0; trial < 5; ++trial) {
        PolytropicEos eos(uk(rng), ug(rng));
        double s = us(rng);
        CHECK(eos.a_of(s) == doctest::Approx(a_by_quadrature(eos, s)).epsilon(1e-10));
    }
}

TEST_CASE("a_prime and its inverse") {
    PolytropicEos eos(1, 2);
    CHECK(eos.a_prime_inv(0.0) == 0.0);
    CHECK(eos.a_prime(3.0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(eos.a_prime_inv(5.0) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(eos.a_prime_inv(-5e-15) == 0.0);
    CHECK_THROWS_AS(eos.a_prime_inv(-1e-3), std::domain_error);

    for (double g : {1.7, 2.0, 2.5}) {
        PolytropicEos e(1.3, g);
        for (double s : {1e-6, 1.0, 10.0})
            CHECK(e.a_prime_inv(e.a_prime(s)) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("a_prime strictly increasing; A convex") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> us(0.0, 4.0), ut(0.0, 1.0);
    PolytropicEos eos(2.0, 1.9);
    for (int trial = 0; trial < 200; ++trial) {
        double s1 = us(rng), s2 = us(rng), t = ut(rng);
        if (s1 > s2) std::swap(s1, s2);
        if (s2 > s1) CHECK(eos.a_prime(s2) > eos.a_prime(s1));
        double lhs = eos.a_of(t * s1 + (1.0 - t) * s2);
        double rhs = t * eos.a_of(s1) + (1.0 - t) * eos.a_of(s2);
        CHECK(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
    }
}

TEST_CASE("scaling coefficients") {
    PolytropicEos g2(1, 2);
    auto s = g2.scaling_coeffs(0.25);
    CHECK(s.A == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(s.B == doctest::Approx(1.0).epsilon(1e-14));
    auto unit = PolytropicEos(1, 2.2).scaling_coeffs(1.0);
    CHECK(unit.A == 1.0);
    CHECK(unit.B == 1.0);
    auto s25 = PolytropicEos(1, 2.5).scaling_coeffs(0.1);
    CHECK(s25.A == doctest::Approx(std::pow(0.1, -4.0 / 7.0)).epsilon(1e-14));
    CHECK(s25.B == doctest::Approx(std::pow(0.1, 1.0 / 7.0)).epsilon(1e-14));
    CHECK_THROWS_AS(g2.scaling_coeffs(0.0), std::domain_error);
    CHECK_THROWS_AS(g2.scaling_coeffs(-1.0), std::domain_error);
}

TEST_CASE("a_prime scaling identity on sampled profiles") {
    // A'(Atil * sigma(Bx)) = Atil^(gamma-1) A'(sigma)(Bx), pointwise.
    PolytropicEos eos(1.7, 2.3);
    double Atil = 3.1, B = 0.6;
    auto sigma = [](double x) { return std::exp(-x * x); };
    for (double x = 0.0; x < 3.0; x += 0.37) {
        double lhs = eos.a_prime(Atil * sigma(B * x));
        double rhs = std::pow(Atil, eos.gamma() - 1.0) * eos.a_prime(sigma(B * x));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
}

TEST_SUITE_END();
