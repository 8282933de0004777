#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "duet/config.hpp"
#include "duet/diagnostics.hpp"
#include "duet/lane_emden.hpp"
#include "duet/minimizer.hpp"

namespace py = pybind11;
using namespace duet;

namespace {

py::array_t<double> density_array(const GridDensity& rho) {
    const GridGeometry& g = rho.geom;
    py::array_t<double> out({g.nz, g.ny, g.nx});
    auto buf = out.mutable_unchecked<3>();
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) buf(k, j, i) = rho.values[g.index(i, j, k)];
    return out;
}

GridDensity density_from(py::array_t<double, py::array::c_style | py::array::forcecast> values,
                         double h, std::array<double, 3> origin) {
    auto buf = values.unchecked<3>();
    GridGeometry geom;
    geom.nz = int(buf.shape(0));
    geom.ny = int(buf.shape(1));
    geom.nx = int(buf.shape(2));
    geom.h = h;
    geom.origin = {origin[0], origin[1], origin[2]};
    GridDensity rho(geom);
    for (int k = 0; k < geom.nz; ++k)
        for (int j = 0; j < geom.ny; ++j)
            for (int i = 0; i < geom.nx; ++i) rho.values[geom.index(i, j, k)] = buf(k, j, i);
    rho.validate();
    return rho;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Uniformly rotating star-planet equilibria of the Euler-Poisson system";

    py::class_<PolytropicEos>(m, "PolytropicEos")
        .def(py::init<double, double>(), py::arg("kpress"), py::arg("gamma"))
        .def_property_readonly("kpress", &PolytropicEos::kpress)
        .def_property_readonly("gamma", &PolytropicEos::gamma)
        .def_property_readonly("supports_star_planet", &PolytropicEos::supports_star_planet)
        .def_property_readonly("shrinking_planet", &PolytropicEos::shrinking_planet)
        .def("pressure", &PolytropicEos::pressure)
        .def("a_of", &PolytropicEos::a_of)
        .def("a_prime", &PolytropicEos::a_prime)
        .def("a_prime_inv", &PolytropicEos::a_prime_inv)
        .def("scaling_coeffs", [](const PolytropicEos& e, double mass) {
            auto s = e.scaling_coeffs(mass);
            return std::make_pair(s.A, s.B);
        });

    py::class_<GridDensity>(m, "GridDensity")
        .def(py::init(&density_from), py::arg("values"), py::arg("h"), py::arg("origin"))
        .def_property_readonly("values", &density_array)
        .def_property_readonly("h", [](const GridDensity& rho) { return rho.geom.h; })
        .def_property_readonly("origin", [](const GridDensity& rho) { return rho.geom.origin; })
        .def("mass", &GridDensity::mass)
        .def("center_of_mass", &GridDensity::center_of_mass)
        .def("max_value", &GridDensity::max_value)
        .def("lp_norm", &GridDensity::lp_norm);

    m.def("write_gpd1", &write_gpd1, py::arg("density"), py::arg("path"));
    m.def("read_gpd1", &read_gpd1, py::arg("path"));

    py::class_<RadialProfile>(m, "RadialProfile")
        .def_readonly("mass", &RadialProfile::mass)
        .def_readonly("radius", &RadialProfile::radius)
        .def_readonly("central_density", &RadialProfile::central_density)
        .def_readonly("lam", &RadialProfile::lambda)
        .def_readonly("e0", &RadialProfile::e0)
        .def_readonly("u_internal", &RadialProfile::u_internal)
        .def("density_at", &RadialProfile::density_at)
        .def("potential_at", &RadialProfile::potential_at)
        .def("samples", &RadialProfile::samples);

    m.def("solve_unit", &solve_unit);
    m.def("rescale", &rescale);
    m.def("lambda_of_mass", &lambda_of_mass);
    m.def("to_grid", &to_grid, py::arg("profile"), py::arg("n"), py::arg("h"), py::arg("center"));

    m.def("potential", [](const GridDensity& rho) {
        GridField V = potential(rho);
        GridDensity out;
        out.geom = V.geom;
        out.values = V.values;
        return density_array(out);
    });
    m.def("moment_of_inertia",
          [](const GridDensity& rho) { return moment_of_inertia(rho); });
    m.def("interpolation_check", &interpolation_check);
    m.def("potential_sup_bound", &potential_sup_bound);

    py::class_<EnergyBreakdown>(m, "EnergyBreakdown")
        .def_readonly("U", &EnergyBreakdown::U)
        .def_readonly("Gself", &EnergyBreakdown::Gself)
        .def_readonly("Ginter", &EnergyBreakdown::Ginter)
        .def_readonly("TJ", &EnergyBreakdown::TJ)
        .def_readonly("EJ", &EnergyBreakdown::EJ)
        .def_readonly("I", &EnergyBreakdown::I)
        .def_readonly("xbar", &EnergyBreakdown::xbar)
        .def_readonly("masses", &EnergyBreakdown::masses);

    m.def("energies",
          [](const GridDensity& rho, double J, const PolytropicEos& eos) {
              return energies(rho, J, eos);
          },
          py::arg("density"), py::arg("J"), py::arg("eos"));

    py::class_<DomainPair>(m, "DomainPair")
        .def_readonly("eta", &DomainPair::eta)
        .def_readonly("ball_radius", &DomainPair::ball_radius)
        .def_readonly("center_planet", &DomainPair::center_planet)
        .def_readonly("center_star", &DomainPair::center_star);
    m.def("make_domains", &make_domains, py::arg("J"), py::arg("m"));

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("J", &SolverConfig::J)
        .def_readwrite("m", &SolverConfig::m)
        .def_readwrite("gamma", &SolverConfig::gamma)
        .def_readwrite("kpress", &SolverConfig::kpress)
        .def_readwrite("cap", &SolverConfig::cap)
        .def_readwrite("mixing", &SolverConfig::mixing)
        .def_readwrite("tol_mass", &SolverConfig::tol_mass)
        .def_readwrite("tol_fixedpoint", &SolverConfig::tol_fixedpoint)
        .def_readwrite("tol_multiplier", &SolverConfig::tol_multiplier)
        .def_readwrite("max_iter", &SolverConfig::max_iter)
        .def_readwrite("cells_per_radius", &SolverConfig::cells_per_radius)
        .def_readwrite("margin", &SolverConfig::margin)
        .def_property(
            "coupling",
            [](const SolverConfig& c) {
                return c.coupling == Coupling::monopole ? "monopole" : "quadrupole";
            },
            [](SolverConfig& c, const std::string& v) {
                c.coupling = (v == "quadrupole") ? Coupling::quadrupole : Coupling::monopole;
            });

    py::class_<ElResidual>(m, "ElResidual")
        .def_readonly("active", &ElResidual::active)
        .def_readonly("slack", &ElResidual::slack);

    py::class_<MinimizerResult>(m, "MinimizerResult")
        .def_readonly("converged", &MinimizerResult::converged)
        .def_readonly("iterations", &MinimizerResult::iterations)
        .def_readonly("J", &MinimizerResult::J)
        .def_readonly("multipliers", &MinimizerResult::multipliers)
        .def_readonly("breakdown", &MinimizerResult::breakdown)
        .def_readonly("mass_errors", &MinimizerResult::mass_errors)
        .def_readonly("el_residuals", &MinimizerResult::el_residuals)
        .def_readonly("change", &MinimizerResult::change)
        .def_readonly("seed_energy", &MinimizerResult::seed_energy)
        .def_readonly("gauge_bound", &MinimizerResult::gauge_bound)
        .def_property_readonly("densities",
                               [](const MinimizerResult& r) {
                                   py::dict out;
                                   for (const Patch& p : r.system.patches)
                                       out[py::str(p.label)] = p.density;
                                   return out;
                               })
        .def_property_readonly("eta", [](const MinimizerResult& r) { return r.domains.eta; });

    m.def("minimize", &minimize, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("ep_residual", &ep_residual, py::arg("result"), py::arg("eos"));

    m.def("kepler_energy", &kepler_energy);
    m.def("kepler_argmin", &kepler_argmin);
    m.def("g_functions", [](double z, double eps, double R, double J) {
        GPair g = g_functions(z, eps, R, J);
        return std::make_pair(g.g_eps, g.g0);
    });
    m.def("separation_ratio", &separation_ratio);
    py::class_<SupportStats>(m, "SupportStats")
        .def_readonly("radius", &SupportStats::radius)
        .def_readonly("component_count", &SupportStats::component_count)
        .def_readonly("max_gap", &SupportStats::max_gap)
        .def_readonly("linf", &SupportStats::linf);
    m.def("support_stats", &support_stats, py::arg("patch"), py::arg("floor") = -1.0);
    m.def("scaling_density", &scaling_density);
    m.def("exponent_fit", [](const std::vector<std::pair<double, double>>& samples) {
        PowerFit f = exponent_fit(samples);
        return std::make_tuple(f.slope, f.intercept, f.residual);
    });

    m.attr("__version__") = DUET_VERSION;
}
