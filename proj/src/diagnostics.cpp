#include "duet/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

namespace duet {

namespace {

double support_floor(const GridDensity& rho, double floor) {
    return floor >= 0.0 ? floor : 1e-9 * rho.max_value();
}

struct Components {
    std::vector<int> label;  // -1 for empty cells
    int count = 0;
};

Components flood_fill(const GridDensity& rho, double floor) {
    const GridGeometry& g = rho.geom;
    Components c;
    c.label.assign(g.size(), -1);
    std::vector<std::size_t> stack;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t s = g.index(i, j, k);
                if (rho.values[s] <= floor || c.label[s] >= 0) continue;
                c.label[s] = c.count;
                stack.push_back(s);
                while (!stack.empty()) {
                    std::size_t cur = stack.back();
                    stack.pop_back();
                    int ci = int(cur % g.nx);
                    int cj = int((cur / g.nx) % g.ny);
                    int ck = int(cur / (std::size_t(g.nx) * g.ny));
                    const int d[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                    for (auto& dd : d) {
                        int ni = ci + dd[0], nj = cj + dd[1], nk = ck + dd[2];
                        if (ni < 0 || nj < 0 || nk < 0 || ni >= g.nx || nj >= g.ny || nk >= g.nz)
                            continue;
                        std::size_t ns = g.index(ni, nj, nk);
                        if (rho.values[ns] > floor && c.label[ns] < 0) {
                            c.label[ns] = c.count;
                            stack.push_back(ns);
                        }
                    }
                }
                ++c.count;
            }
    return c;
}

}  // namespace

double kepler_energy(double d, double mu, double J) {
    if (!(d > 0.0)) throw std::domain_error("kepler_energy: separation must be positive");
    if (!(mu > 0.0)) throw std::domain_error("kepler_energy: reduced mass must be positive");
    if (J < 0.0) throw std::domain_error("kepler_energy: J must be non-negative");
    return -mu / d + J * J / (2.0 * mu * d * d);
}

double kepler_argmin(double mu, double J) {
    if (!(mu > 0.0)) throw std::domain_error("kepler_argmin: reduced mass must be positive");
    if (J < 0.0) throw std::domain_error("kepler_argmin: J must be non-negative");
    if (J == 0.0) return std::numeric_limits<double>::infinity();
    return J * J / (mu * mu);
}

GPair g_functions(double z, double eps, double R, double J) {
    if (!(z >= 0.5)) throw std::domain_error("g_functions: z must be at least 1/2");
    if (eps < 0.0) throw std::domain_error("g_functions: eps must be non-negative");
    GPair g;
    g.g0 = -1.0 / z + 1.0 / (2.0 * z * z) + 0.5;
    g.g_eps = -1.0 / (z - 2.0 * eps) +
              1.0 / (2.0 * (z * z + std::pow(eps, 1.5) * std::sqrt(R) / J)) +
              1.0 / (1.0 + 2.0 * eps) - 0.5;
    return g;
}

double separation_ratio(const MinimizerResult& result) {
    if (result.system.patches.size() < 2)
        throw std::domain_error("separation_ratio: needs planet and star components");
    Vec3 xp = result.system.by_label("planet").density.center_of_mass();
    Vec3 xs = result.system.by_label("star").density.center_of_mass();
    return norm(xp - xs) / result.domains.eta;
}

SupportStats support_stats(const GridDensity& patch, double floor) {
    double f = support_floor(patch, floor);
    const GridGeometry& g = patch.geom;
    SupportStats st;
    st.linf = patch.max_value();
    Components comps = flood_fill(patch, f);
    st.component_count = comps.count;
    if (comps.count == 0) throw std::domain_error("support_stats: empty patch");

    // Center of mass of the above-floor cells.
    KahanSum sm, sx, sy, sz;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double v = patch.values[g.index(i, j, k)];
                if (v <= f) continue;
                Vec3 x = g.cell_center(i, j, k);
                sm.add(v);
                sx.add(v * x[0]);
                sy.add(v * x[1]);
                sz.add(v * x[2]);
            }
    Vec3 xbar{sx.value() / sm.value(), sy.value() / sm.value(), sz.value() / sm.value()};
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                if (patch.values[g.index(i, j, k)] > f)
                    st.radius = std::max(st.radius, norm(g.cell_center(i, j, k) - xbar));

    if (comps.count > 1) {
        // Hull distance per component pair; the largest is reported.
        std::vector<std::vector<Vec3>> cells(comps.count);
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    int lb = comps.label[g.index(i, j, k)];
                    if (lb >= 0) cells[lb].push_back(g.cell_center(i, j, k));
                }
        for (int a = 0; a < comps.count; ++a)
            for (int b = a + 1; b < comps.count; ++b) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vec3& xa : cells[a])
                    for (const Vec3& xb : cells[b]) best = std::min(best, norm(xa - xb));
                st.max_gap = std::max(st.max_gap, best);
            }
    }
    return st;
}

GridDensity scaling_density(const GridDensity& rho_m, double m, const PolytropicEos& eos) {
    if (!(m > 0.0)) throw std::domain_error("scaling_density: m must be positive");
    auto s = eos.scaling_coeffs(m);
    Vec3 xbar = rho_m.center_of_mass();
    GridDensity out = rho_m;
    out.geom.h = rho_m.geom.h / s.B;
    out.geom.origin = (1.0 / s.B) * (rho_m.geom.origin - xbar);
    for (double& v : out.values) v *= s.A;
    return out;
}

MultiplierCheck multiplier_bound_check(const MinimizerResult& result,
                                       const RadialProfile& unit_profile) {
    MultiplierCheck c;
    double kappa1 = unit_profile.lambda;
    double m = 1.0;
    double lambda = 0.0;
    if (result.system.patches.size() >= 2) {
        for (std::size_t p = 0; p < result.system.patches.size(); ++p)
            if (result.system.patches[p].label == "planet") {
                m = result.system.patches[p].target_mass;
                lambda = result.multipliers[p];
            }
    } else {
        m = result.system.patches[0].target_mass;
        lambda = result.multipliers.empty() ? 0.0 : result.multipliers[0];
    }
    double A = unit_profile.eos.scaling_coeffs(m).A;
    c.value = std::pow(A, unit_profile.eos.gamma() - 1.0) * lambda;
    c.bound = kappa1 + 0.1 * std::abs(kappa1);
    c.margin = c.bound - c.value;
    c.ok = c.value <= c.bound;
    return c;
}

ShiftRecord component_shift_test(const PatchSystem& sys, const std::string& label, double J,
                                 const PolytropicEos& eos, double h_step, double RJ) {
    ShiftRecord rec;
    const Patch* patch = nullptr;
    std::size_t patch_idx = 0;
    for (std::size_t p = 0; p < sys.patches.size(); ++p)
        if (sys.patches[p].label == label) {
            patch = &sys.patches[p];
            patch_idx = p;
        }
    if (!patch) throw std::out_of_range("component_shift_test: no patch labeled " + label);

    const GridDensity& rho = patch->density;
    const GridGeometry& g = rho.geom;
    double floor = support_floor(rho, -1.0);
    Components comps = flood_fill(rho, floor);
    if (comps.count != 2) return rec;  // skip record per contract

    // Masses and index ranges of the two components.
    double mass[2] = {0.0, 0.0};
    int lo[2][3], hi[2][3];
    for (int c = 0; c < 2; ++c)
        for (int a = 0; a < 3; ++a) {
            lo[c][a] = std::numeric_limits<int>::max();
            hi[c][a] = std::numeric_limits<int>::min();
        }
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                int lb = comps.label[g.index(i, j, k)];
                if (lb < 0) continue;
                mass[lb] += rho.values[g.index(i, j, k)];
                int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    lo[lb][a] = std::min(lo[lb][a], idx[a]);
                    hi[lb][a] = std::max(hi[lb][a], idx[a]);
                }
            }
    mass[0] *= g.cell_volume();
    mass[1] *= g.cell_volume();

    // Separating lattice axis, with component U below V.
    int axis = -1;
    int u = 0, v = 1;
    for (int a = 0; a < 3 && axis < 0; ++a) {
        if (hi[0][a] < lo[1][a]) {
            axis = a;
            u = 0;
            v = 1;
        } else if (hi[1][a] < lo[0][a]) {
            axis = a;
            u = 1;
            v = 0;
        }
    }
    if (axis < 0) return rec;

    rec.applicable = true;
    rec.m1 = mass[u];
    rec.m2 = mass[v];

    // Hull gap between the components.
    std::vector<Vec3> cu, cv;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                int lb = comps.label[g.index(i, j, k)];
                if (lb == u) cu.push_back(g.cell_center(i, j, k));
                if (lb == v) cv.push_back(g.cell_center(i, j, k));
            }
    rec.gap = std::numeric_limits<double>::infinity();
    for (const Vec3& xa : cu)
        for (const Vec3& xb : cv) rec.gap = std::min(rec.gap, norm(xa - xb));

    double m_total = mass[0] + mass[1];
    double gamma = eos.gamma();
    rec.d_star = 32.0 * std::pow(1.0 - m_total, 5) * std::pow(RJ, 3) *
                 std::pow(m_total, (12.0 * gamma - 18.0) / (3.0 * gamma - 4.0)) /
                 std::pow(J, 4);

    // Split the approach into integer cell moves with h1 m1 ~= h2 m2.
    int s_total = int(std::llround(h_step / g.h));
    int s1 = 0, s2 = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= s_total; ++a) {
        double imbalance = std::abs(a * rec.m1 - (s_total - a) * rec.m2);
        if (imbalance < best) {
            best = imbalance;
            s1 = a;
            s2 = s_total - a;
        }
    }
    rec.h_applied = s_total * g.h;
    if (s_total > 0 && hi[u][axis] + s1 >= lo[v][axis] - s2)
        throw std::invalid_argument("component_shift_test: step would merge the components");

    PatchSystem moved = sys;
    GridDensity& dst = moved.patches[patch_idx].density;
    std::fill(dst.values.begin(), dst.values.end(), 0.0);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                int lb = comps.label[g.index(i, j, k)];
                if (lb < 0) continue;
                int idx[3] = {i, j, k};
                idx[axis] += (lb == u) ? s1 : -s2;
                if (idx[0] < 0 || idx[1] < 0 || idx[2] < 0 || idx[0] >= g.nx || idx[1] >= g.ny ||
                    idx[2] >= g.nz)
                    throw std::invalid_argument("component_shift_test: move leaves the grid");
                dst.values[g.index(idx[0], idx[1], idx[2])] = rho.values[g.index(i, j, k)];
            }

    rec.dE = energies(sys, J, eos).EJ - energies(moved, J, eos).EJ;
    rec.com_drift = norm(dst.center_of_mass() - rho.center_of_mass());
    return rec;
}

ProbeResult local_min_probe(const MinimizerResult& result, const PolytropicEos& eos, int trials,
                            double radius_frac, double cap, std::uint64_t rng_seed) {
    ProbeResult out;
    out.trials = trials;
    out.base_energy = energies(result.system, result.J, eos).EJ;
    out.worst_dE = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(rng_seed);

    // Occupied-cell lists per patch.
    struct PatchInfo {
        std::vector<std::size_t> cells;
        double floor;
        double radius;
        Vec3 ball_center;
    };
    std::vector<PatchInfo> info(result.system.patches.size());
    for (std::size_t p = 0; p < info.size(); ++p) {
        const GridDensity& rho = result.system.patches[p].density;
        info[p].floor = support_floor(rho, -1.0);
        SupportStats st = support_stats(rho);
        info[p].radius = st.radius;
        info[p].ball_center = result.domains.ball_radius > 0.0 &&
                                      std::isfinite(result.domains.ball_radius)
                                  ? (result.system.patches[p].label == "planet"
                                         ? result.domains.center_planet
                                         : result.domains.center_star)
                                  : rho.center_of_mass();
        const GridGeometry& g = rho.geom;
        for (std::size_t c = 0; c < g.size(); ++c)
            if (rho.values[c] > info[p].floor) info[p].cells.push_back(c);
    }

    long long max_rejections = 100LL * trials;
    long long rejected = 0;
    for (int t = 0; t < trials; ++t) {
        bool accepted = false;
        while (!accepted) {
            if (rejected > max_rejections)
                throw std::runtime_error("local_min_probe: feasible draws exhausted");
            std::size_t p = rng() % info.size();
            const GridDensity& rho = result.system.patches[p].density;
            const GridGeometry& g = rho.geom;
            const PatchInfo& pi = info[p];
            if (pi.cells.size() < 2) {
                ++rejected;
                continue;
            }
            double rb = radius_frac * pi.radius;
            std::size_t cplus = pi.cells[rng() % pi.cells.size()];
            std::size_t cminus = pi.cells[rng() % pi.cells.size()];
            if (cplus == cminus) {
                ++rejected;
                continue;
            }
            auto center_of = [&](std::size_t c) {
                int i = int(c % g.nx);
                int j = int((c / g.nx) % g.ny);
                int k = int(c / (std::size_t(g.nx) * g.ny));
                return g.cell_center(i, j, k);
            };
            Vec3 xplus = center_of(cplus), xminus = center_of(cminus);
            // Keep bump supports inside the admissible ball.
            if (std::isfinite(result.domains.ball_radius) && result.domains.ball_radius > 0.0) {
                if (norm(xplus - pi.ball_center) + rb > result.domains.ball_radius ||
                    norm(xminus - pi.ball_center) + rb > result.domains.ball_radius) {
                    ++rejected;
                    continue;
                }
            }

            // Unit-amplitude bump pair, each normalized to unit mass.
            std::vector<std::pair<std::size_t, double>> bump;
            double mplus = 0.0, mminus = 0.0;
            auto collect = [&](const Vec3& c0, double sign, double& msum) {
                int i0[3];
                for (int a = 0; a < 3; ++a)
                    i0[a] = int(std::floor((c0[a] - g.origin[a]) / g.h));
                int w = int(std::ceil(rb / g.h)) + 1;
                for (int k = std::max(0, i0[2] - w); k <= std::min(g.nz - 1, i0[2] + w); ++k)
                    for (int j = std::max(0, i0[1] - w); j <= std::min(g.ny - 1, i0[1] + w); ++j)
                        for (int i = std::max(0, i0[0] - w); i <= std::min(g.nx - 1, i0[0] + w);
                             ++i) {
                            double r = norm(g.cell_center(i, j, k) - c0);
                            if (r >= rb) continue;
                            double c = std::cos(0.5 * 3.14159265358979323846 * r / rb);
                            double w2 = c * c;
                            bump.emplace_back(g.index(i, j, k), sign * w2);
                            msum += w2;
                        }
            };
            collect(xplus, +1.0, mplus);
            collect(xminus, -1.0, mminus);
            if (mplus <= 0.0 || mminus <= 0.0) {
                ++rejected;
                continue;
            }
            // Normalize each sign to unit mass so the pair integrates to zero.
            for (auto& [c, v] : bump) v /= (v > 0.0 ? mplus : mminus) * g.cell_volume();

            double amax = std::numeric_limits<double>::infinity();
            for (auto& [c, v] : bump) {
                if (v < 0.0) amax = std::min(amax, rho.values[c] / (-v));
                else if (std::isfinite(cap))
                    amax = std::min(amax, (cap - rho.values[c]) / v);
            }
            if (!(amax > 0.0) || !std::isfinite(amax)) {
                if (!std::isfinite(amax)) amax = 1.0;  // no cap and no negative side hit
                else {
                    ++rejected;
                    continue;
                }
            }
            double mass_scale = 0.05 * result.system.patches[p].target_mass;
            double a = std::min(0.5 * amax, mass_scale);

            PatchSystem perturbed = result.system;
            GridDensity& dst = perturbed.patches[p].density;
            for (auto& [c, v] : bump) dst.values[c] = std::max(0.0, dst.values[c] + a * v);
            double dE = energies(perturbed, result.J, eos).EJ - out.base_energy;
            out.worst_dE = std::min(out.worst_dE, dE);
            accepted = true;
        }
    }
    out.rejected = int(rejected);
    return out;
}

SymmetryReport symmetry_check(const GridDensity& rho, double floor) {
    const GridGeometry& g = rho.geom;
    // Mirroring is exact only on grids centered on the z = 0 plane.
    double zc = g.origin[2] + 0.5 * (g.nz - 1) * g.h;
    if (std::abs(zc) > 1e-9 * g.h)
        throw std::invalid_argument("symmetry_check: grid not centered on z = 0");
    double f = support_floor(rho, floor);
    SymmetryReport rep;
    KahanSum dev, total;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double a = rho.values[g.index(i, j, k)];
                double b = rho.values[g.index(i, j, g.nz - 1 - k)];
                dev.add(std::abs(a - b));
                total.add(std::abs(a));
            }
    rep.mirror_l1 = total.value() > 0.0 ? dev.value() / total.value() : 0.0;

    double linf = rho.max_value();
    if (linf > 0.0) {
        double worst = 0.0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                // Ascending |z| on the upper half, descending on the lower.
                for (int k = g.nz / 2; k + 1 < g.nz; ++k) {
                    double a = rho.values[g.index(i, j, k)];
                    double b = rho.values[g.index(i, j, k + 1)];
                    if (a > f || b > f) worst = std::max(worst, b - a);
                }
                for (int k = (g.nz - 1) / 2; k > 0; --k) {
                    double a = rho.values[g.index(i, j, k)];
                    double b = rho.values[g.index(i, j, k - 1)];
                    if (a > f || b > f) worst = std::max(worst, b - a);
                }
            }
        rep.monotonicity_violation = worst / linf;
    }
    return rep;
}

SymmetryReport symmetry_check(const MinimizerResult& result) {
    SymmetryReport worst;
    for (const Patch& p : result.system.patches) {
        SymmetryReport r = symmetry_check(p.density);
        worst.mirror_l1 = std::max(worst.mirror_l1, r.mirror_l1);
        worst.monotonicity_violation =
            std::max(worst.monotonicity_violation, r.monotonicity_violation);
    }
    return worst;
}

PowerFit exponent_fit(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 3) throw std::domain_error("exponent_fit: need at least 3 samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [m, v] : samples) {
        if (!(m > 0.0) || !(v > 0.0))
            throw std::domain_error("exponent_fit: samples must be positive");
        double x = std::log(m), y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double n = double(samples.size());
    PowerFit fit;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss = 0.0;
    for (auto [m, v] : samples) {
        double r = std::log(v) - (fit.slope * std::log(m) + fit.intercept);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

SweepPoint evaluate_point(const MinimizerResult& result, const RadialProfile& unit_profile,
                          const PolytropicEos& eos) {
    SweepPoint pt;
    pt.J = result.J;
    pt.gamma = eos.gamma();
    pt.converged = result.converged;
    pt.iterations = result.iterations;
    pt.EJ = result.breakdown.EJ;
    pt.U = result.breakdown.U;
    pt.Gself = result.breakdown.Gself;
    pt.Ginter = result.breakdown.Ginter;
    pt.TJ = result.breakdown.TJ;
    pt.I = result.breakdown.I;

    const Patch* planet = nullptr;
    const Patch* star = nullptr;
    for (std::size_t p = 0; p < result.system.patches.size(); ++p) {
        const Patch& patch = result.system.patches[p];
        if (patch.label == "planet") {
            planet = &patch;
            pt.lambda_planet = result.multipliers[p];
        } else {
            star = &patch;
            pt.lambda_star = result.multipliers[p];
        }
    }
    pt.m = planet ? planet->target_mass : 1.0;

    double clearance = std::numeric_limits<double>::infinity();
    auto patch_stats = [&](const Patch& p, double& radius, double& linf, int& comps,
                           double& gap) {
        SupportStats st = support_stats(p.density);
        radius = st.radius;
        linf = st.linf;
        comps = st.component_count;
        gap = st.max_gap;
        if (result.domains.ball_radius > 0.0 && std::isfinite(result.domains.ball_radius)) {
            Vec3 c = p.label == "planet" ? result.domains.center_planet
                                         : result.domains.center_star;
            const GridGeometry& g = p.density.geom;
            double f = support_floor(p.density, -1.0);
            double extent = 0.0;
            for (int k = 0; k < g.nz; ++k)
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i)
                        if (p.density.values[g.index(i, j, k)] > f)
                            extent = std::max(extent, norm(g.cell_center(i, j, k) - c));
            clearance = std::min(clearance, result.domains.ball_radius - extent);
        }
    };
    if (star) patch_stats(*star, pt.star_radius, pt.star_linf, pt.star_components,
                          pt.star_max_gap);
    if (planet)
        patch_stats(*planet, pt.planet_radius, pt.planet_linf, pt.planet_components,
                    pt.planet_max_gap);
    pt.boundary_clearance = std::isfinite(clearance) ? clearance : 0.0;

    if (planet && star) {
        pt.d_over_eta = separation_ratio(result);
        double Rmeas = std::max(pt.planet_radius, pt.star_radius);
        double eps = Rmeas / result.domains.eta;
        pt.g_eps_at_ratio = g_functions(pt.d_over_eta, eps, Rmeas, result.J).g_eps;
        pt.e0_planet = energies(planet->density, 0.0, eos).EJ;
        pt.e0_star = energies(star->density, 0.0, eos).EJ;
        GridDensity scaled = scaling_density(planet->density, pt.m, eos);
        pt.scaled_planet_e0 = energies(scaled, 0.0, eos).EJ;
    }
    MultiplierCheck mc = multiplier_bound_check(result, unit_profile);
    pt.multiplier_ok = mc.ok;
    pt.multiplier_margin = mc.margin;
    return pt;
}

std::vector<FitRow> sweep_fits(const std::vector<SweepPoint>& points) {
    std::map<std::pair<double, double>, std::vector<const SweepPoint*>> groups;
    for (const SweepPoint& p : points)
        if (p.converged) groups[{p.gamma, p.J}].push_back(&p);

    std::vector<FitRow> rows;
    for (auto& [key, pts] : groups) {
        auto [gamma, J] = key;
        double mmin = std::numeric_limits<double>::infinity(), mmax = 0.0;
        for (auto* p : pts) {
            mmin = std::min(mmin, p->m);
            mmax = std::max(mmax, p->m);
        }
        // Rate laws are asymptotic; short levers are meaningless.
        if (pts.size() < 3 || mmax < 4.0 * mmin) continue;
        auto fit_of = [&](const std::string& name, auto getter, double expected) {
            std::vector<std::pair<double, double>> samples;
            for (auto* p : pts) {
                double v = getter(*p);
                if (v > 0.0) samples.emplace_back(p->m, v);
            }
            if (samples.size() < 3) return;
            PowerFit f = exponent_fit(samples);
            rows.push_back({gamma, J, name, f.slope, expected, f.residual, int(samples.size())});
        };
        fit_of("planet_linf", [](const SweepPoint& p) { return p.planet_linf; },
               2.0 / (3.0 * gamma - 4.0));
        fit_of("planet_radius", [](const SweepPoint& p) { return p.planet_radius; },
               (gamma - 2.0) / (3.0 * gamma - 4.0));
        fit_of("e0_planet_negative", [](const SweepPoint& p) { return -p.e0_planet; },
               (5.0 * gamma - 6.0) / (3.0 * gamma - 4.0));
    }
    return rows;
}

namespace {

const char* kSweepColumns =
    "J,m,gamma,converged,iterations,EJ,U,Gself,Ginter,TJ,I,lambda_planet,lambda_star,"
    "planet_radius,star_radius,planet_linf,star_linf,planet_components,star_components,"
    "planet_max_gap,star_max_gap,d_over_eta,g_eps_at_ratio,e0_planet,e0_star,"
    "scaled_planet_e0,multiplier_ok,multiplier_margin,boundary_clearance,error";

}  // namespace

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "# one row per (J, m, gamma) sweep point; fixed column order\n";
    f << kSweepColumns << "\n";
    for (const SweepPoint& p : points) {
        f << fp17(p.J) << "," << fp17(p.m) << "," << fp17(p.gamma) << ","
          << (p.converged ? 1 : 0) << "," << p.iterations << "," << fp17(p.EJ) << ","
          << fp17(p.U) << "," << fp17(p.Gself) << "," << fp17(p.Ginter) << "," << fp17(p.TJ)
          << "," << fp17(p.I) << "," << fp17(p.lambda_planet) << "," << fp17(p.lambda_star)
          << "," << fp17(p.planet_radius) << "," << fp17(p.star_radius) << ","
          << fp17(p.planet_linf) << "," << fp17(p.star_linf) << "," << p.planet_components
          << "," << p.star_components << "," << fp17(p.planet_max_gap) << ","
          << fp17(p.star_max_gap) << "," << fp17(p.d_over_eta) << "," << fp17(p.g_eps_at_ratio)
          << "," << fp17(p.e0_planet) << "," << fp17(p.e0_star) << ","
          << fp17(p.scaled_planet_e0) << "," << (p.multiplier_ok ? 1 : 0) << ","
          << fp17(p.multiplier_margin) << "," << fp17(p.boundary_clearance) << "," << p.error
          << "\n";
    }
}

void write_sweep_json(const std::vector<SweepPoint>& points, const std::string& path) {
    JsonWriter w;
    w.begin_object();
    w.begin_array("points");
    for (const SweepPoint& p : points) {
        w.object_in_array();
        w.key_value("J", p.J);
        w.key_value("m", p.m);
        w.key_value("gamma", p.gamma);
        w.key_value("converged", p.converged);
        w.key_value("iterations", p.iterations);
        w.key_value("EJ", p.EJ);
        w.key_value("U", p.U);
        w.key_value("Gself", p.Gself);
        w.key_value("Ginter", p.Ginter);
        w.key_value("TJ", p.TJ);
        w.key_value("I", p.I);
        w.key_value("lambda_planet", p.lambda_planet);
        w.key_value("lambda_star", p.lambda_star);
        w.key_value("planet_radius", p.planet_radius);
        w.key_value("star_radius", p.star_radius);
        w.key_value("planet_linf", p.planet_linf);
        w.key_value("star_linf", p.star_linf);
        w.key_value("planet_components", p.planet_components);
        w.key_value("star_components", p.star_components);
        w.key_value("planet_max_gap", p.planet_max_gap);
        w.key_value("star_max_gap", p.star_max_gap);
        w.key_value("d_over_eta", p.d_over_eta);
        w.key_value("g_eps_at_ratio", p.g_eps_at_ratio);
        w.key_value("e0_planet", p.e0_planet);
        w.key_value("e0_star", p.e0_star);
        w.key_value("scaled_planet_e0", p.scaled_planet_e0);
        w.key_value("multiplier_ok", p.multiplier_ok);
        w.key_value("multiplier_margin", p.multiplier_margin);
        w.key_value("boundary_clearance", p.boundary_clearance);
        w.key_value("error", p.error);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << w.str() << "\n";
}

void write_fit_csv(const std::vector<FitRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "gamma,J,quantity,slope,expected,residual,count\n";
    for (const FitRow& r : rows)
        f << fp17(r.gamma) << "," << fp17(r.J) << "," << r.quantity << "," << fp17(r.slope)
          << "," << fp17(r.expected) << "," << fp17(r.residual) << "," << r.count << "\n";
}

}  // namespace duet
