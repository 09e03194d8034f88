#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <tuple>

#include "hybrid/errors.hpp"
#include "hybrid/scenario.hpp"

namespace py = pybind11;
using namespace hybrid;

namespace {

using ComplexArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;
using TermSpec = std::tuple<int, int, Matrix>;

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

/// (n_x, n_p, d, d) array view of a matrix field.
ComplexArray field_to_array(const MatrixField& f) {
    const PhaseGrid& g = f.grid();
    const int d = f.dim();
    ComplexArray out({static_cast<py::ssize_t>(g.n_x()), static_cast<py::ssize_t>(g.n_p()), static_cast<py::ssize_t>(d),
                      static_cast<py::ssize_t>(d)});
    auto v = out.mutable_unchecked<4>();
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const auto e = f.entry(r, c);
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_p(); ++j) v(i, j, r, c) = e[g.index(i, j)];
        }
    return out;
}

MatrixField array_to_field(const ComplexArray& a, const PhaseGrid& g) {
    if (a.ndim() != 4 || a.shape(0) != g.n_x() || a.shape(1) != g.n_p() || a.shape(2) != a.shape(3))
        throw InvariantError("field array must have shape (n_x, n_p, d, d) matching the grid");
    const int d = static_cast<int>(a.shape(2));
    MatrixField f(g, d);
    auto v = a.unchecked<4>();
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            auto e = f.entry(r, c);
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_p(); ++j) e[g.index(i, j)] = v(i, j, r, c);
        }
    return f;
}

HybridPolynomialHamiltonian hamiltonian_from(int dim, const std::vector<TermSpec>& terms) {
    HybridPolynomialHamiltonian h(dim);
    for (const auto& [x, p, op] : terms) h.add(x, p, HermitianOperator(op));
    return h;
}

const char* side_name(Side s) { return s == Side::Left ? "left" : "right"; }

}  // namespace

PYBIND11_MODULE(_hybridsim, m) {
    m.doc() = "Hybrid quantum-classical phase-space simulator";
    m.attr("__version__") = HYBRIDSIM_VERSION;

    // Later registrations are tried first, so subclasses go after the base.
    const py::handle base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvariantError>(m, "InvariantError", base);
    py::register_exception<DomainTooSmall>(m, "DomainTooSmall", base);
    py::register_exception<BoundaryLeakError>(m, "BoundaryLeakError", base);
    py::register_exception<IllPosedError>(m, "IllPosedError", base);
    py::register_exception<StabilityError>(m, "StabilityError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);

    py::class_<PhaseGrid>(m, "PhaseGrid")
        .def(py::init<double, double, int, double, double, int>(), py::arg("x_min"), py::arg("x_max"), py::arg("n_x"),
             py::arg("p_min"), py::arg("p_max"), py::arg("n_p"))
        .def_static("square", &PhaseGrid::square, py::arg("half_width"), py::arg("n"))
        .def_property_readonly("n_x", &PhaseGrid::n_x)
        .def_property_readonly("n_p", &PhaseGrid::n_p)
        .def_property_readonly("dx", &PhaseGrid::dx)
        .def_property_readonly("dp", &PhaseGrid::dp)
        .def_property_readonly("cell_area", &PhaseGrid::cell_area)
        .def_property_readonly("x", [](const PhaseGrid& g) {
            std::vector<double> v(g.n_x());
            for (int i = 0; i < g.n_x(); ++i) v[i] = g.x(i);
            return py::array_t<double>(v.size(), v.data());
        })
        .def_property_readonly("p", [](const PhaseGrid& g) {
            std::vector<double> v(g.n_p());
            for (int j = 0; j < g.n_p(); ++j) v[j] = g.p(j);
            return py::array_t<double>(v.size(), v.data());
        })
        .def("__repr__", [](const PhaseGrid& g) {
            return "PhaseGrid(x=[" + std::to_string(g.x_min()) + ", " + std::to_string(g.x_max()) + ") n_x=" +
                   std::to_string(g.n_x()) + ", p=[" + std::to_string(g.p_min()) + ", " + std::to_string(g.p_max()) +
                   ") n_p=" + std::to_string(g.n_p()) + ")";
        });

    m.def(
        "run_scenario",
        [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
            const ScenarioResult r = run(load_scenario(path, overrides));
            py::dict files;
            for (const auto& [name, text] : r.files.files()) files[py::str(name)] = text;
            return py::make_tuple(to_python(r.report), files);
        },
        py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
        "Runs a scenario file; returns (report, {file name: text}) without writing anything.");
    m.def(
        "validate_scenario",
        [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
            return to_python(validate(load_scenario(path, overrides)));
        },
        py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "compile_terms",
        [](int dim, const std::vector<TermSpec>& terms) {
            const LiouvillianTermList compiled = compile(hamiltonian_from(dim, terms));
            py::list out;
            for (const auto& t : compiled.terms()) {
                py::dict coeff;
                for (const auto& [e, c] : t.coeff.terms()) coeff[py::make_tuple(e.x, e.p)] = c;
                py::dict d;
                d["side"] = side_name(t.side);
                d["dx"] = t.dx;
                d["dp"] = t.dp;
                d["coeff"] = coeff;
                d["op"] = t.op;
                out.append(d);
            }
            return out;
        },
        py::arg("dim"), py::arg("terms"),
        "Compiles sum x^a p^b C into one-sided derivative terms; terms are (a, b, C) tuples.");
    m.def(
        "dump_terms", [](int dim, const std::vector<TermSpec>& terms) { return compile(hamiltonian_from(dim, terms)).dump(); },
        py::arg("dim"), py::arg("terms"));

    m.def(
        "product_state",
        [](const Matrix& rho_q, const PhaseGrid& grid, double x0, double p0, double var) {
            return field_to_array(product_state(DensityOperator(rho_q), gaussian(grid, x0, p0, var)).field());
        },
        py::arg("rho_q"), py::arg("grid"), py::arg("x0") = 0.0, py::arg("p0") = 0.0, py::arg("var") = 1.0);
    m.def(
        "evolve",
        [](const ComplexArray& rho, const PhaseGrid& grid, const std::vector<TermSpec>& terms, double t_final, double dt) {
            const HybridDensity h0(array_to_field(rho, grid));
            EvolveDiagnostics diag;
            const HybridDensity h1 = evolve(h0, compile(hamiltonian_from(h0.dim(), terms)), t_final, dt, {}, &diag);
            py::dict d;
            d["steps"] = diag.steps;
            d["dt"] = diag.dt;
            d["drift_per_time"] = diag.drift_per_time;
            d["max_hermiticity_defect"] = diag.max_hermiticity_defect;
            return py::make_tuple(field_to_array(h1.field()), d);
        },
        py::arg("rho"), py::arg("grid"), py::arg("terms"), py::arg("t_final"), py::arg("dt"));
    m.def(
        "quantum_marginal",
        [](const ComplexArray& rho, const PhaseGrid& grid) {
            return quantum_marginal(HybridDensity(array_to_field(rho, grid))).matrix();
        },
        py::arg("rho"), py::arg("grid"));
    m.def(
        "classical_marginal",
        [](const ComplexArray& rho, const PhaseGrid& grid) {
            const ScalarField f = classical_marginal(HybridDensity(array_to_field(rho, grid)));
            py::array_t<double> out({grid.n_x(), grid.n_p()});
            auto v = out.mutable_unchecked<2>();
            for (int i = 0; i < grid.n_x(); ++i)
                for (int j = 0; j < grid.n_p(); ++j) v(i, j) = f(i, j);
            return out;
        },
        py::arg("rho"), py::arg("grid"));

    m.def(
        "measure",
        [](const Matrix& rho_q, double g, const PhaseGrid& grid, bool numeric) {
            const MeasurementConfig cfg(ProjectorSet::diagonal(static_cast<int>(rho_q.rows())), g, DensityOperator(rho_q));
            const HybridDensity init = measurement_initial_state(cfg, grid);
            const HybridDensity out = numeric ? kick_numeric(cfg, init) : kick_closed_form(cfg, init);
            return py::make_tuple(to_python(to_json(outcome_statistics(out, cfg, &init))), field_to_array(out.field()));
        },
        py::arg("rho_q"), py::arg("g"), py::arg("grid"), py::arg("numeric") = false,
        "Pointer measurement in the computational basis; returns (outcome report, final field).");

    m.def(
        "dequantize",
        [](const Matrix& rho, int n_max, const PhaseGrid& grid) {
            return field_to_array(dequantize(DensityOperator(rho), ModeAssignment(FockTruncation(n_max)), grid).field());
        },
        py::arg("rho"), py::arg("n_max"), py::arg("grid"), "Husimi map of the first tensor factor (the mode).");
    m.def(
        "quantize",
        [](const ComplexArray& field, const PhaseGrid& grid, int n_max) {
            const QuantizeResult q = quantize(HybridDensity(array_to_field(field, grid)), ModeAssignment(FockTruncation(n_max)));
            return py::make_tuple(q.state.matrix(), q.residual);
        },
        py::arg("field"), py::arg("grid"), py::arg("n_max"), "Least-squares inverse Husimi map; returns (rho, residual).");
}
