#include "duet/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace duet {

namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW's planner is not thread-safe; executions on private buffers are.
std::mutex planner_mutex;

struct PaddedDims {
    int px, py, pz;
    std::size_t real_size() const { return std::size_t(px) * py * pz; }
    std::size_t cplx_size() const { return std::size_t(pz) * py * (std::size_t(px) / 2 + 1); }
};

PaddedDims padded(const GridGeometry& g) { return {2 * g.nx, 2 * g.ny, 2 * g.nz}; }

// Row-major with x fastest maps onto FFTW dims (nz, ny, nx).
std::size_t pidx(const PaddedDims& d, int i, int j, int k) {
    return std::size_t(i) + std::size_t(d.px) * (std::size_t(j) + std::size_t(d.py) * k);
}

double simpson_2d_unit_square(int n, const std::function<double(double, double)>& f) {
    // n even panels per axis.
    auto w1 = [n](int i) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
    double h = 1.0 / n;
    KahanSum s;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) s.add(w1(i) * w1(j) * f(i * h, j * h));
    return s.value() * h * h / 9.0;
}

// Signed minimal lattice displacement for wraparound kernel indexing.
int wrap_offset(int i, int period) { return (i <= period / 2) ? i : i - period; }

using KernelHandle = std::shared_ptr<const std::vector<std::complex<double>>>;

KernelHandle kernel_fft(const GridGeometry& g) {
    static std::map<std::array<int, 3>, KernelHandle> cache;
    static std::mutex cache_mutex;
    std::array<int, 3> key{g.nx, g.ny, g.nz};
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }

    PaddedDims d = padded(g);
    double* real = fftw_alloc_real(d.real_size());
    fftw_complex* cplx = fftw_alloc_complex(d.cplx_size());
    double w0 = self_cell_kernel_unit();
    for (int k = 0; k < d.pz; ++k) {
        int dz = wrap_offset(k, d.pz);
        for (int j = 0; j < d.py; ++j) {
            int dy = wrap_offset(j, d.py);
            for (int i = 0; i < d.px; ++i) {
                int dx = wrap_offset(i, d.px);
                double r2 = double(dx) * dx + double(dy) * dy + double(dz) * dz;
                real[pidx(d, i, j, k)] = (r2 == 0.0) ? w0 : 1.0 / std::sqrt(r2);
            }
        }
    }
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        plan = fftw_plan_dft_r2c_3d(d.pz, d.py, d.px, real, cplx, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    auto out = std::make_shared<std::vector<std::complex<double>>>(d.cplx_size());
    for (std::size_t n = 0; n < d.cplx_size(); ++n) (*out)[n] = {cplx[n][0], cplx[n][1]};
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(real);
    fftw_free(cplx);
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto [it, inserted] = cache.emplace(key, out);
    return it->second;
}

double kernel_value(const GridGeometry& g, int di, int dj, int dk) {
    if (di == 0 && dj == 0 && dk == 0) return self_cell_kernel_unit() / g.h;
    double r2 = double(di) * di + double(dj) * dj + double(dk) * dk;
    return 1.0 / (g.h * std::sqrt(r2));
}

struct AxisBox {
    double lo[3], hi[3];
};

AxisBox bounding_box(const GridGeometry& g) {
    AxisBox b;
    int dims[3] = {g.nx, g.ny, g.nz};
    for (int c = 0; c < 3; ++c) {
        b.lo[c] = g.origin[c] - 0.5 * g.h;
        b.hi[c] = g.origin[c] + (dims[c] - 1) * g.h + 0.5 * g.h;
    }
    return b;
}

bool boxes_overlap(const AxisBox& a, const AxisBox& b) {
    for (int c = 0; c < 3; ++c)
        if (a.hi[c] <= b.lo[c] || b.hi[c] <= a.lo[c]) return false;
    return true;
}

}  // namespace

double self_cell_kernel_unit() {
    // Average of 1/|u| over the unit cube = 3 * int_0^1 int_0^1 (1+u^2+v^2)^(-1/2),
    // after splitting the corner integral into pyramids (Duffy substitution).
    static const double value = 3.0 * simpson_2d_unit_square(512, [](double u, double v) {
        return 1.0 / std::sqrt(1.0 + u * u + v * v);
    });
    return value;
}

GridField potential(const GridDensity& rho) {
    rho.validate();
    const GridGeometry& g = rho.geom;
    PaddedDims d = padded(g);
    KernelHandle khat = kernel_fft(g);

    double* real = fftw_alloc_real(d.real_size());
    fftw_complex* cplx = fftw_alloc_complex(d.cplx_size());
    std::fill(real, real + d.real_size(), 0.0);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) real[pidx(d, i, j, k)] = rho.values[g.index(i, j, k)];

    fftw_plan fwd, bwd;
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        fwd = fftw_plan_dft_r2c_3d(d.pz, d.py, d.px, real, cplx, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_3d(d.pz, d.py, d.px, cplx, real, FFTW_ESTIMATE);
    }
    fftw_execute(fwd);
    for (std::size_t n = 0; n < d.cplx_size(); ++n) {
        std::complex<double> prod = std::complex<double>(cplx[n][0], cplx[n][1]) * (*khat)[n];
        cplx[n][0] = prod.real();
        cplx[n][1] = prod.imag();
    }
    fftw_execute(bwd);

    // V = h^2 * (rho (*) kernel_in_cell_units), plus FFT normalization.
    double scale = g.h * g.h / double(d.real_size());
    GridField V(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                V.values[g.index(i, j, k)] = real[pidx(d, i, j, k)] * scale;

    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    fftw_free(real);
    fftw_free(cplx);
    return V;
}

GridField potential_direct(const GridDensity& rho) {
    rho.validate();
    const GridGeometry& g = rho.geom;
    GridField V(g);
    double h2 = g.h * g.h * g.h;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                KahanSum s;
                for (int kk = 0; kk < g.nz; ++kk)
                    for (int jj = 0; jj < g.ny; ++jj)
                        for (int ii = 0; ii < g.nx; ++ii) {
                            double v = rho.values[g.index(ii, jj, kk)];
                            if (v == 0.0) continue;
                            s.add(v * kernel_value(g, i - ii, j - jj, k - kk));
                        }
                V.values[g.index(i, j, k)] = s.value() * h2;
            }
    return V;
}

void PatchSystem::validate() const {
    if (patches.empty()) throw std::invalid_argument("patch system: no patches");
    for (const Patch& p : patches) {
        p.density.validate();
        if (p.label.empty()) throw std::invalid_argument("patch system: unlabeled patch");
    }
    for (std::size_t a = 0; a < patches.size(); ++a)
        for (std::size_t b = a + 1; b < patches.size(); ++b)
            if (boxes_overlap(bounding_box(patches[a].density.geom),
                              bounding_box(patches[b].density.geom)))
                throw std::invalid_argument("patch system: bounding boxes overlap");
}

const Patch& PatchSystem::by_label(const std::string& label) const {
    for (const Patch& p : patches)
        if (p.label == label) return p;
    throw std::out_of_range("patch system: no patch labeled " + label);
}

Multipole Multipole::of(const GridDensity& rho) {
    Multipole mp;
    mp.mass = rho.mass();
    if (mp.mass <= 0.0) throw std::domain_error("multipole: zero-mass patch");
    mp.com = rho.center_of_mass();
    const GridGeometry& g = rho.geom;
    KahanSum q[6];
    double r2max = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double v = rho.values[g.index(i, j, k)];
                if (v == 0.0) continue;
                Vec3 x = g.cell_center(i, j, k) - mp.com;
                double r2 = dot(x, x);
                r2max = std::max(r2max, r2);
                q[0].add(v * (3.0 * x[0] * x[0] - r2));
                q[1].add(v * (3.0 * x[1] * x[1] - r2));
                q[2].add(v * (3.0 * x[2] * x[2] - r2));
                q[3].add(v * 3.0 * x[0] * x[1]);
                q[4].add(v * 3.0 * x[0] * x[2]);
                q[5].add(v * 3.0 * x[1] * x[2]);
            }
    double vol = g.cell_volume();
    for (int c = 0; c < 6; ++c) mp.quad[c] = q[c].value() * vol;
    // Half cell diagonal covers the extent of the farthest occupied cell.
    mp.radius = std::sqrt(r2max) + 0.5 * std::sqrt(3.0) * g.h;
    return mp;
}

double Multipole::eval(const Vec3& point, Coupling order) const {
    Vec3 d = point - com;
    double r = norm(d);
    double v = mass / r;
    if (order == Coupling::quadrupole) {
        Vec3 n = (1.0 / r) * d;
        double qnn = quad[0] * n[0] * n[0] + quad[1] * n[1] * n[1] + quad[2] * n[2] * n[2] +
                     2.0 * (quad[3] * n[0] * n[1] + quad[4] * n[0] * n[2] + quad[5] * n[1] * n[2]);
        v += 0.5 * qnn / (r * r * r);
    }
    return v;
}

Vec3 Multipole::grad(const Vec3& point, Coupling order) const {
    Vec3 d = point - com;
    double r2 = dot(d, d);
    double r = std::sqrt(r2);
    double inv_r3 = 1.0 / (r2 * r);
    Vec3 g = (-mass * inv_r3) * d;
    if (order == Coupling::quadrupole) {
        // V_quad = (1/2) d.Q.d / r^5
        Vec3 Qd{quad[0] * d[0] + quad[3] * d[1] + quad[4] * d[2],
                quad[3] * d[0] + quad[1] * d[1] + quad[5] * d[2],
                quad[4] * d[0] + quad[5] * d[1] + quad[2] * d[2]};
        double dQd = dot(d, Qd);
        double inv_r5 = inv_r3 / r2;
        double inv_r7 = inv_r5 / r2;
        g = g + inv_r5 * Qd - (2.5 * dQd * inv_r7) * d;
    }
    return g;
}

double Multipole::error_bound(const Vec3& point, Coupling order) const {
    double d = norm(point - com);
    int p = (order == Coupling::monopole) ? 1 : 2;
    return std::pow(radius / d, p + 1) * mass / d;
}

std::vector<double> potential_at_external(const GridDensity& rho, std::span<const Vec3> points,
                                          Coupling order) {
    Multipole mp = Multipole::of(rho);
    AxisBox box = bounding_box(rho.geom);
    double pad = 2.0 * rho.geom.h;
    for (const Vec3& p : points) {
        bool inside = true;
        for (int c = 0; c < 3; ++c)
            if (p[c] < box.lo[c] - pad || p[c] > box.hi[c] + pad) inside = false;
        if (inside)
            throw std::domain_error("potential_at_external: point inside inflated patch box");
    }
    std::vector<double> out;
    out.reserve(points.size());
    for (const Vec3& p : points) out.push_back(mp.eval(p, order));
    return out;
}

std::pair<double, Vec3> moment_of_inertia(const GridDensity& rho) {
    Vec3 xbar = rho.center_of_mass();  // throws on zero mass
    const GridGeometry& g = rho.geom;
    KahanSum s;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double v = rho.values[g.index(i, j, k)];
                if (v == 0.0) continue;
                s.add(v * r2_axis(g.cell_center(i, j, k) - xbar));
            }
    return {s.value() * g.cell_volume(), xbar};
}

std::pair<double, Vec3> moment_of_inertia(const PatchSystem& sys) {
    double mass = 0.0;
    Vec3 mx{0, 0, 0};
    std::vector<std::pair<double, Vec3>> own;
    std::vector<double> masses;
    for (const Patch& p : sys.patches) {
        double m = p.density.mass();
        masses.push_back(m);
        if (m <= 0.0) {
            own.push_back({0.0, Vec3{0, 0, 0}});
            continue;
        }
        own.push_back(moment_of_inertia(p.density));
        mass += m;
        mx = mx + m * own.back().second;
    }
    if (mass <= 0.0) throw std::domain_error("moment_of_inertia: zero total mass");
    Vec3 xbar = (1.0 / mass) * mx;
    double I = 0.0;
    for (std::size_t p = 0; p < own.size(); ++p)
        if (masses[p] > 0.0) I += own[p].first + masses[p] * r2_axis(own[p].second - xbar);
    return {I, xbar};
}

double interaction_energy(const GridDensity& a, const GridDensity& b) {
    if (!a.geom.same_as(b.geom))
        throw std::invalid_argument("interaction_energy: geometries differ");
    GridField Va = potential(a);
    KahanSum s;
    for (std::size_t n = 0; n < b.values.size(); ++n) s.add(b.values[n] * Va.values[n]);
    return s.value() * b.geom.cell_volume();
}

double interaction_energy_far(const GridDensity& a, const GridDensity& b, Coupling order) {
    Multipole ma = Multipole::of(a);
    Multipole mb = Multipole::of(b);
    auto sum_against = [order](const Multipole& src, const GridDensity& dst) {
        const GridGeometry& g = dst.geom;
        KahanSum s;
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    double v = dst.values[g.index(i, j, k)];
                    if (v == 0.0) continue;
                    s.add(v * src.eval(g.cell_center(i, j, k), order));
                }
        return s.value() * g.cell_volume();
    };
    return 0.5 * (sum_against(ma, b) + sum_against(mb, a));
}

namespace {

double internal_energy(const GridDensity& rho, const PolytropicEos& eos) {
    KahanSum s;
    for (double v : rho.values) s.add(eos.a_of(v));
    return s.value() * rho.geom.cell_volume();
}

double self_interaction(const GridDensity& rho) {
    GridField V = potential(rho);
    KahanSum s;
    for (std::size_t n = 0; n < rho.values.size(); ++n) s.add(rho.values[n] * V.values[n]);
    return s.value() * rho.geom.cell_volume();
}

}  // namespace

EnergyBreakdown energies(const GridDensity& rho, double J, const PolytropicEos& eos) {
    rho.validate();
    EnergyBreakdown e;
    e.masses = {rho.mass()};
    if (J > 0.0 && e.masses[0] <= 0.0)
        throw std::domain_error("energies: J > 0 with zero mass, inertia undefined");
    e.U = internal_energy(rho, eos);
    e.Gself = self_interaction(rho);
    e.Ginter = 0.0;
    if (e.masses[0] > 0.0) {
        auto [I, xbar] = moment_of_inertia(rho);
        e.I = I;
        e.xbar = xbar;
    }
    e.TJ = (J > 0.0) ? J * J / (2.0 * e.I) : 0.0;
    e.EJ = e.U - 0.5 * e.Gself + e.TJ;
    return e;
}

EnergyBreakdown energies(const PatchSystem& sys, double J, const PolytropicEos& eos) {
    sys.validate();
    EnergyBreakdown e;
    double gpp = 0.0;
    for (const Patch& p : sys.patches) {
        e.masses.push_back(p.density.mass());
        e.U += internal_energy(p.density, eos);
        gpp += self_interaction(p.density);
    }
    double total_mass = 0.0;
    for (double m : e.masses) total_mass += m;
    if (J > 0.0 && total_mass <= 0.0)
        throw std::domain_error("energies: J > 0 with zero mass, inertia undefined");

    double ginter = 0.0;
    for (std::size_t a = 0; a < sys.patches.size(); ++a)
        for (std::size_t b = a + 1; b < sys.patches.size(); ++b)
            if (e.masses[a] > 0.0 && e.masses[b] > 0.0)
                ginter += interaction_energy_far(sys.patches[a].density, sys.patches[b].density,
                                                 sys.coupling);
    e.Ginter = ginter;
    e.Gself = gpp + 2.0 * ginter;
    auto [I, xbar] = moment_of_inertia(sys);
    e.I = I;
    e.xbar = xbar;
    e.TJ = (J > 0.0) ? J * J / (2.0 * e.I) : 0.0;
    e.EJ = e.U - 0.5 * e.Gself + e.TJ;
    return e;
}

bool interpolation_check(const GridDensity& rho, double p, double r, double q) {
    if (!(p >= 1.0) || !(p <= r) || !(r <= q))
        throw std::domain_error("interpolation_check: need 1 <= p <= r <= q");
    double inv_p = 1.0 / p;
    double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
    double inv_r = std::isinf(r) ? 0.0 : 1.0 / r;
    double alpha = (inv_p == inv_q) ? 1.0 : (inv_r - inv_q) / (inv_p - inv_q);
    double lhs = rho.lp_norm(r);
    double rhs = std::pow(rho.lp_norm(p), alpha) * std::pow(rho.lp_norm(q), 1.0 - alpha);
    if (lhs == 0.0) return true;
    return lhs <= rhs * (1.0 + 1e-12);
}

double potential_sup_bound(const GridDensity& rho) {
    double k = 1.5 * std::cbrt(4.0 * kPi);
    return k * std::pow(rho.lp_norm(1.0), 2.0 / 3.0) *
           std::cbrt(rho.max_value());
}

}  // namespace duet
