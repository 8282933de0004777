#include "duet/lane_emden.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "duet/util.hpp"

namespace duet {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct State {
    double theta;
    double phi;  // theta'
};

State rhs(double x, const State& s, double n) {
    double t = std::max(s.theta, 0.0);
    return {s.phi, -std::pow(t, n) - 2.0 * s.phi / x};
}

// Dormand-Prince 5(4).  theta is O(1) throughout, so a fixed absolute
// tolerance is appropriate; the max step keeps the Hermite dense output
// at ~1e-11.
struct OdeTrace {
    std::vector<double> xi, theta, dtheta;
    double xi1 = 0.0, dtheta1 = 0.0;
};

OdeTrace integrate_lane_emden(double n) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    OdeTrace tr;
    // Series start past the coordinate singularity:
    // theta = 1 - xi^2/6 + n xi^4/120 - n(8n-5) xi^6/15120.
    double x = 1e-2;
    State y{1.0 - x * x / 6.0 + n * std::pow(x, 4) / 120.0 -
                n * (8.0 * n - 5.0) * std::pow(x, 6) / 15120.0,
            -x / 3.0 + n * std::pow(x, 3) / 30.0 - n * (8.0 * n - 5.0) * std::pow(x, 5) / 2520.0};
    tr.xi.push_back(x);
    tr.theta.push_back(y.theta);
    tr.dtheta.push_back(y.phi);

    const double tol = 1e-13, hmax = 0.02, hmin = 1e-12;
    double h = 1e-4;
    State k1 = rhs(x, y, n);
    for (int iter = 0; iter < 2000000; ++iter) {
        h = std::min(h, hmax);
        State k2 = rhs(x + c2 * h, {y.theta + h * a21 * k1.theta, y.phi + h * a21 * k1.phi}, n);
        State k3 = rhs(x + c3 * h,
                       {y.theta + h * (a31 * k1.theta + a32 * k2.theta),
                        y.phi + h * (a31 * k1.phi + a32 * k2.phi)},
                       n);
        State k4 = rhs(x + c4 * h,
                       {y.theta + h * (a41 * k1.theta + a42 * k2.theta + a43 * k3.theta),
                        y.phi + h * (a41 * k1.phi + a42 * k2.phi + a43 * k3.phi)},
                       n);
        State k5 = rhs(x + c5 * h,
                       {y.theta + h * (a51 * k1.theta + a52 * k2.theta + a53 * k3.theta +
                                       a54 * k4.theta),
                        y.phi + h * (a51 * k1.phi + a52 * k2.phi + a53 * k3.phi + a54 * k4.phi)},
                       n);
        State k6 = rhs(x + h,
                       {y.theta + h * (a61 * k1.theta + a62 * k2.theta + a63 * k3.theta +
                                       a64 * k4.theta + a65 * k5.theta),
                        y.phi + h * (a61 * k1.phi + a62 * k2.phi + a63 * k3.phi + a64 * k4.phi +
                                     a65 * k5.phi)},
                       n);
        State y5{y.theta + h * (b1 * k1.theta + b3 * k3.theta + b4 * k4.theta + b5 * k5.theta +
                                b6 * k6.theta),
                 y.phi + h * (b1 * k1.phi + b3 * k3.phi + b4 * k4.phi + b5 * k5.phi + b6 * k6.phi)};
        State k7 = rhs(x + h, y5, n);
        double err_t = h * (e1 * k1.theta + e3 * k3.theta + e4 * k4.theta + e5 * k5.theta +
                            e6 * k6.theta + e7 * k7.theta);
        double err_p = h * (e1 * k1.phi + e3 * k3.phi + e4 * k4.phi + e5 * k5.phi + e6 * k6.phi +
                            e7 * k7.phi);
        double err = std::max(std::abs(err_t), std::abs(err_p));
        if (err > tol && h > hmin) {
            h = std::max(hmin, 0.9 * h * std::pow(tol / err, 0.2));
            continue;
        }
        double x_new = x + h;
        if (y5.theta <= 0.0) {
            // First zero inside this step; bisect on the cubic Hermite.
            double lo = 0.0, hi = 1.0;
            auto eval = [&](double t) {
                double t2 = t * t, t3 = t2 * t;
                double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
                double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
                return h00 * y.theta + h * h10 * k1.theta + h01 * y5.theta + h * h11 * k7.theta;
            };
            for (int b = 0; b < 100; ++b) {
                double mid = 0.5 * (lo + hi);
                (eval(mid) > 0.0 ? lo : hi) = mid;
            }
            double t = 0.5 * (lo + hi);
            double t2 = t * t;
            double d00 = (6 * t2 - 6 * t) / h, d10 = 3 * t2 - 4 * t + 1;
            double d01 = (-6 * t2 + 6 * t) / h, d11 = 3 * t2 - 2 * t;
            tr.xi1 = x + t * h;
            tr.dtheta1 = d00 * y.theta + d10 * k1.theta + d01 * y5.theta + d11 * k7.theta;
            tr.xi.push_back(tr.xi1);
            tr.theta.push_back(0.0);
            tr.dtheta.push_back(tr.dtheta1);
            return tr;
        }
        x = x_new;
        y = y5;
        k1 = k7;  // FSAL
        tr.xi.push_back(x);
        tr.theta.push_back(y.theta);
        tr.dtheta.push_back(y.phi);
        if (err > 0.0) h = std::min(hmax, 0.9 * h * std::pow(tol / err, 0.2));
        if (x > 50.0) break;  // no zero found; gamma too close to 6/5
    }
    throw std::runtime_error("lane_emden: integration failed to reach the first zero");
}

double hermite(const std::vector<double>& xs, const std::vector<double>& ys,
               const std::vector<double>& ds, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    std::size_t lo = 0, hi = xs.size() - 1;
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        (xs[mid] <= x ? lo : hi) = mid;
    }
    double h = xs[lo + 1] - xs[lo];
    double t = (x - xs[lo]) / h;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * ys[lo] + h * h10 * ds[lo] + h01 * ys[lo + 1] + h * h11 * ds[lo + 1];
}

void finish_profile(RadialProfile& p) {
    double n = p.eos.lane_emden_index();
    double g = p.eos.gamma();
    p.radius = p.alpha * p.xi1;
    p.mass = 4.0 * kPi * p.central_density * std::pow(p.alpha, 3) *
             (-p.xi1 * p.xi1 * p.dtheta1);
    p.lambda = -p.mass / p.radius;
    // U = 4 pi alpha^3 K/(g-1) rho_c^g * int theta^(n+1) xi^2,
    // G = (4 pi)^2 rho_c^2 alpha^5 * (int theta^(n+1) xi^2 + xi1^3 theta'(xi1)^2)
    // using the exact identity int_0^xi1 theta^n xi^2 = -xi1^2 theta'(xi1).
    double iu = adaptive_simpson(
        [&](double x) {
            double t = std::max(p.theta_at(x), 0.0);
            return std::pow(t, n + 1.0) * x * x;
        },
        0.0, p.xi1, 1e-12);
    double u = 4.0 * kPi * std::pow(p.alpha, 3) * p.eos.kpress() / (g - 1.0) *
               std::pow(p.central_density, g) * iu;
    double gg = std::pow(4.0 * kPi, 2) * p.central_density * p.central_density *
                std::pow(p.alpha, 5) * (iu + std::pow(p.xi1, 3) * p.dtheta1 * p.dtheta1);
    p.u_internal = u;
    p.e0 = u - 0.5 * gg;
}

}  // namespace

double RadialProfile::theta_at(double x) const {
    if (x < xi.front()) {
        double n = eos.lane_emden_index();
        return 1.0 - x * x / 6.0 + n * std::pow(x, 4) / 120.0 -
               n * (8.0 * n - 5.0) * std::pow(x, 6) / 15120.0;
    }
    return hermite(xi, theta, dtheta, x);
}

double RadialProfile::density_at(double r) const {
    if (r >= radius) return 0.0;
    double t = theta_at(r / alpha);
    if (t <= 0.0) return 0.0;
    return central_density * std::pow(t, eos.lane_emden_index());
}

double RadialProfile::potential_at(double r) const {
    if (r >= radius) return mass / r;
    double t = std::max(theta_at(r / alpha), 0.0);
    return 4.0 * kPi * central_density * alpha * alpha * (t - xi1 * dtheta1);
}

std::vector<std::pair<double, double>> RadialProfile::samples() const {
    constexpr int kSamples = 2048;
    std::vector<std::pair<double, double>> out;
    out.reserve(kSamples);
    for (int i = 0; i < kSamples; ++i) {
        double r = radius * double(i) / double(kSamples - 1);
        out.emplace_back(r, i + 1 == kSamples ? 0.0 : density_at(r));
    }
    return out;
}

RadialProfile solve_unit(const PolytropicEos& eos) {
    double n = eos.lane_emden_index();
    if (n >= 5.0) throw std::domain_error("lane_emden: gamma <= 6/5 has no finite radius");
    OdeTrace tr = integrate_lane_emden(n);

    RadialProfile p{eos};
    p.xi = std::move(tr.xi);
    p.theta = std::move(tr.theta);
    p.dtheta = std::move(tr.dtheta);
    p.xi1 = tr.xi1;
    p.dtheta1 = tr.dtheta1;
    p.central_density = 1.0;
    p.alpha = std::sqrt((n + 1.0) * eos.kpress() / (4.0 * kPi));
    finish_profile(p);

    // One homology rescale brings the central-density-1 solve to mass 1.
    double f = 1.0 / p.mass;
    auto s = eos.scaling_coeffs(f);
    p.central_density /= s.A;
    p.alpha *= s.B;
    finish_profile(p);
    return p;
}

RadialProfile rescale(const RadialProfile& unit, double m) {
    if (!(m > 0.0)) throw std::domain_error("rescale: m must be positive");
    double f = m / unit.mass;
    auto s = unit.eos.scaling_coeffs(f);
    RadialProfile p = unit;
    p.central_density /= s.A;
    p.alpha *= s.B;
    finish_profile(p);
    return p;
}

double lambda_of_mass(const RadialProfile& unit, double m) {
    if (m < 0.0) throw std::domain_error("lambda_of_mass: m must be non-negative");
    double g = unit.eos.gamma();
    if (m == 0.0) return 0.0;
    return -(5.0 * g - 6.0) * std::pow(m, (2.0 * g - 2.0) / (3.0 * g - 4.0)) * unit.u_internal;
}

double energy_by_quadrature(const RadialProfile& p) {
    double u = 4.0 * kPi *
               adaptive_simpson([&](double r) { return p.eos.a_of(p.density_at(r)) * r * r; },
                                0.0, p.radius, 1e-13);
    double gg = 4.0 * kPi *
                adaptive_simpson(
                    [&](double r) { return p.density_at(r) * p.potential_at(r) * r * r; }, 0.0,
                    p.radius, 1e-13);
    return u - 0.5 * gg;
}

GridDensity to_grid(const RadialProfile& p, int n, double h, const Vec3& center) {
    if (!(h > 0.0) || n <= 0) throw std::invalid_argument("to_grid: bad geometry");
    if (p.radius / h < 8.0)
        throw std::invalid_argument("to_grid: geometry resolves the radius with < 8 cells");
    if (0.5 * n * h < p.radius)
        throw std::invalid_argument("to_grid: grid does not contain the support");
    GridDensity rho(GridGeometry::cube(n, h, center));
    const GridGeometry& g = rho.geom;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                rho.values[g.index(i, j, k)] = p.density_at(norm(g.cell_center(i, j, k) - center));
    double m = rho.mass();
    if (m <= 0.0) throw std::runtime_error("to_grid: sampled zero mass");
    double f = p.mass / m;
    for (double& v : rho.values) v *= f;
    return rho;
}

void write_profile_csv(const RadialProfile& p, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "r,rho,V\n";
    for (auto [r, rho] : p.samples())
        f << fp17(r) << "," << fp17(rho) << "," << fp17(p.potential_at(std::max(r, 1e-300)))
          << "\n";
}

}  // namespace duet
