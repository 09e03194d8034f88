#include "hybrid/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

// --- YAML access -----------------------------------------------------------

std::string located(const YAML::Node& n, const std::string& path, const std::string& msg) {
    std::ostringstream out;
    out << path << ": " << msg;
    if (n.IsDefined() && !n.Mark().is_null()) out << " (line " << n.Mark().line + 1 << ")";
    return out.str();
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& path, const std::string& msg) {
    throw ConfigError(located(n, path, msg));
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const YAML::Node& n, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!n.IsMap()) fail(n, path, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key)) fail(kv.first, join(path, key), "unknown field");
    }
}

void expect_map(const YAML::Node& n, const std::string& path) {
    if (!n.IsMap()) fail(n, path.empty() ? "<top level>" : path, "expected a mapping");
}

YAML::Node required(const YAML::Node& n, const std::string& key, const std::string& path) {
    expect_map(n, path);
    const YAML::Node c = n[key];
    if (!c) fail(n, join(path, key), "missing required field");
    return c;
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& path) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        fail(n, path, "cannot read value");
    }
}

template <typename T>
T value_or(const YAML::Node& n, const std::string& key, const std::string& path, T fallback) {
    expect_map(n, path);
    const YAML::Node c = n[key];
    return c ? scalar<T>(c, join(path, key)) : fallback;
}

double finite(const YAML::Node& n, const std::string& path) {
    const double v = scalar<double>(n, path);
    if (!std::isfinite(v)) fail(n, path, "must be finite");
    return v;
}

cplx complex_entry(const YAML::Node& n, const std::string& path) {
    if (n.IsSequence()) {
        if (n.size() != 2) fail(n, path, "complex numbers are written [re, im]");
        return {finite(n[0], path + "[0]"), finite(n[1], path + "[1]")};
    }
    return {finite(n, path), 0.0};
}

Vector complex_vector(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() == 0) fail(n, path, "expected a non-empty list");
    Vector v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = complex_entry(n[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Matrix complex_matrix(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() == 0) fail(n, path, "expected a list of rows");
    const auto rows = static_cast<Eigen::Index>(n.size());
    Matrix m(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const YAML::Node row = n[static_cast<std::size_t>(r)];
        const std::string rp = path + "[" + std::to_string(r) + "]";
        if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != rows) fail(row, rp, "matrix must be square");
        for (Eigen::Index c = 0; c < rows; ++c)
            m(r, c) = complex_entry(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
    }
    return m;
}

// --- overrides ---------------------------------------------------------------

void apply_override(YAML::Node& root, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "' is not key=value");
    const std::string key = spec.substr(0, eq);
    std::vector<std::string> segs;
    std::stringstream ss(key);
    for (std::string s; std::getline(ss, s, '.');) {
        if (s.empty()) throw ConfigError("override key '" + key + "' has an empty segment");
        segs.push_back(s);
    }
    YAML::Node value;
    try {
        value = YAML::Load(spec.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ConfigError("override '" + spec + "': " + e.what());
    }
    YAML::Node cur = root;
    for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
        if (cur.IsSequence()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(segs[i]);
            } catch (const std::exception&) {
                throw ConfigError("override key '" + key + "': '" + segs[i] + "' is not a list index");
            }
            if (idx >= cur.size()) throw ConfigError("override key '" + key + "': index out of range");
            YAML::Node child = cur[idx];
            cur.reset(child);
        } else {
            if (!cur[segs[i]] || !(cur[segs[i]].IsMap() || cur[segs[i]].IsSequence()))
                cur[segs[i]] = YAML::Node(YAML::NodeType::Map);
            YAML::Node child = cur[segs[i]];
            cur.reset(child);
        }
    }
    if (cur.IsSequence()) {
        std::size_t idx = 0;
        try {
            idx = std::stoul(segs.back());
        } catch (const std::exception&) {
            throw ConfigError("override key '" + key + "': '" + segs.back() + "' is not a list index");
        }
        if (idx >= cur.size()) throw ConfigError("override key '" + key + "': index out of range");
        cur[idx] = value;
    } else {
        cur[segs.back()] = value;
    }
}

// --- section parsers ---------------------------------------------------------

ScenarioKind parse_kind(const YAML::Node& n) {
    static const std::map<std::string, ScenarioKind> kinds{
        {"classical_limit", ScenarioKind::ClassicalLimit},
        {"quantum_limit", ScenarioKind::QuantumLimit},
        {"hybrid_evolve", ScenarioKind::HybridEvolve},
        {"measurement_closed", ScenarioKind::MeasurementClosed},
        {"measurement_numeric", ScenarioKind::MeasurementNumeric},
        {"cut_shift_roundtrip", ScenarioKind::CutShiftRoundtrip},
        {"robustness_sweep", ScenarioKind::RobustnessSweep},
    };
    const auto s = scalar<std::string>(n, "kind");
    const auto it = kinds.find(s);
    if (it == kinds.end()) fail(n, "kind", "unknown scenario kind '" + s + "'");
    return it->second;
}

PhaseGrid parse_grid(const YAML::Node& n) {
    const std::string path = "grid";
    expect_map(n, path);
    try {
        if (n["half_width"]) {
            check_keys(n, path, {"half_width", "n"});
            return PhaseGrid::square(finite(n["half_width"], path + ".half_width"),
                                     scalar<int>(required(n, "n", path), path + ".n"));
        }
        check_keys(n, path, {"x", "p"});
        const YAML::Node x = required(n, "x", path), p = required(n, "p", path);
        check_keys(x, path + ".x", {"min", "max", "n"});
        check_keys(p, path + ".p", {"min", "max", "n"});
        return PhaseGrid(finite(required(x, "min", path + ".x"), path + ".x.min"),
                         finite(required(x, "max", path + ".x"), path + ".x.max"),
                         scalar<int>(required(x, "n", path + ".x"), path + ".x.n"),
                         finite(required(p, "min", path + ".p"), path + ".p.min"),
                         finite(required(p, "max", path + ".p"), path + ".p.max"),
                         scalar<int>(required(p, "n", path + ".p"), path + ".p.n"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(n, path, e.what());
    }
}

Matrix preset_operator(const std::string& name, int dim, const YAML::Node& n, const std::string& path) {
    const cplx i(0.0, 1.0);
    auto need_qubit = [&] {
        if (dim != 2) fail(n, path, "operator '" + name + "' needs quantum_dim 2");
    };
    if (name == "identity") return Matrix::Identity(dim, dim);
    if (name == "sigma_x") {
        need_qubit();
        Matrix m(2, 2);
        m << 0.0, 1.0, 1.0, 0.0;
        return m;
    }
    if (name == "sigma_y") {
        need_qubit();
        Matrix m(2, 2);
        m << 0.0, -i, i, 0.0;
        return m;
    }
    if (name == "sigma_z") {
        need_qubit();
        Matrix m(2, 2);
        m << 1.0, 0.0, 0.0, -1.0;
        return m;
    }
    if (name == "number") {
        Matrix m = Matrix::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) m(k, k) = k;
        return m;
    }
    if (name == "pointer") {
        Matrix m = Matrix::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) m(k, k) = k + 1;
        return m;
    }
    if (name.rfind("projector_", 0) == 0) {
        int k = 0;
        try {
            k = std::stoi(name.substr(10));
        } catch (const std::exception&) {
            fail(n, path, "bad projector name '" + name + "'");
        }
        if (k < 1 || k > dim) fail(n, path, "projector index out of range 1.." + std::to_string(dim));
        Matrix m = Matrix::Zero(dim, dim);
        m(k - 1, k - 1) = 1.0;
        return m;
    }
    fail(n, path, "unknown operator preset '" + name + "'");
}

std::vector<HamiltonianSpec> parse_hamiltonian(const YAML::Node& n, int dim) {
    const std::string path = "hamiltonian";
    if (!n.IsSequence()) fail(n, path, "expected a list of terms");
    std::vector<HamiltonianSpec> out;
    for (std::size_t k = 0; k < n.size(); ++k) {
        const YAML::Node t = n[k];
        const std::string tp = path + "[" + std::to_string(k) + "]";
        check_keys(t, tp, {"x", "p", "coeff", "op"});
        HamiltonianSpec h;
        h.x = value_or<int>(t, "x", tp, 0);
        h.p = value_or<int>(t, "p", tp, 0);
        if (h.x < 0 || h.p < 0) fail(t, tp, "exponents must be non-negative");
        h.coeff = t["coeff"] ? finite(t["coeff"], tp + ".coeff") : 1.0;
        const YAML::Node op = t["op"];
        if (!op) {
            h.op = Matrix::Identity(dim, dim);
            h.op_name = "I";
        } else if (op.IsScalar()) {
            h.op_name = op.as<std::string>();
            h.op = preset_operator(h.op_name, dim, op, tp + ".op");
        } else {
            h.op = complex_matrix(op, tp + ".op");
            h.op_name = "M" + std::to_string(k);
            if (h.op.rows() != dim) fail(op, tp + ".op", "matrix size does not match quantum_dim");
        }
        if (hermiticity_defect(h.op) > kHermitianTol) fail(t, tp + ".op", "operator is not Hermitian");
        out.push_back(std::move(h));
    }
    return out;
}

DensityOperator parse_quantum_state(const YAML::Node& n, int dim, const std::string& path) {
    check_keys(n, path, {"pure", "populations", "matrix", "preset"});
    if (n.size() != 1) fail(n, path, "give exactly one of pure, populations, matrix, preset");
    try {
        if (n["pure"]) {
            Vector v = complex_vector(n["pure"], path + ".pure");
            if (v.size() != dim) fail(n["pure"], path + ".pure", "length does not match quantum_dim");
            if (v.norm() == 0.0) fail(n["pure"], path + ".pure", "zero vector");
            return DensityOperator::pure(v.normalized());
        }
        if (n["populations"]) {
            const auto pops = scalar<std::vector<double>>(n["populations"], path + ".populations");
            if (static_cast<int>(pops.size()) != dim)
                fail(n["populations"], path + ".populations", "length does not match quantum_dim");
            return DensityOperator::diagonal(pops);
        }
        if (n["matrix"]) {
            Matrix m = complex_matrix(n["matrix"], path + ".matrix");
            if (m.rows() != dim) fail(n["matrix"], path + ".matrix", "size does not match quantum_dim");
            return DensityOperator(std::move(m));
        }
        const auto name = scalar<std::string>(n["preset"], path + ".preset");
        if (name == "maximally_mixed") return DensityOperator::maximally_mixed(dim);
        if (name == "ground") {
            Vector v = Vector::Zero(dim);
            v[0] = 1.0;
            return DensityOperator::pure(v);
        }
        fail(n["preset"], path + ".preset", "unknown state preset '" + name + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(n, path, e.what());
    }
}

GaussianSpec parse_gaussian(const YAML::Node& n, const std::string& path) {
    check_keys(n, path, {"x0", "p0", "var"});
    GaussianSpec g;
    g.x0 = n["x0"] ? finite(n["x0"], path + ".x0") : 0.0;
    g.p0 = n["p0"] ? finite(n["p0"], path + ".p0") : 0.0;
    g.var = n["var"] ? finite(n["var"], path + ".var") : 1.0;
    if (!(g.var > 0.0)) fail(n, path + ".var", "must be positive");
    return g;
}

EvolveSpec parse_evolve(const YAML::Node& n) {
    const std::string path = "evolve";
    check_keys(n, path, {"t_final", "dt", "courant", "drift_budget", "boundary_tol"});
    EvolveSpec e;
    e.t_final = finite(required(n, "t_final", path), path + ".t_final");
    e.dt = finite(required(n, "dt", path), path + ".dt");
    if (e.t_final < 0.0) fail(n["t_final"], path + ".t_final", "must be non-negative");
    if (!(e.dt > 0.0)) fail(n["dt"], path + ".dt", "must be positive");
    e.options.courant = n["courant"] ? finite(n["courant"], path + ".courant") : 0.5;
    e.options.drift_budget = n["drift_budget"] ? finite(n["drift_budget"], path + ".drift_budget") : 1e-6;
    e.options.boundary_tol = n["boundary_tol"] ? finite(n["boundary_tol"], path + ".boundary_tol") : kBoundaryTol;
    return e;
}

MeasurementSpec parse_measurement(const YAML::Node& n, int dim) {
    const std::string path = "measurement";
    check_keys(n, path, {"g", "basis", "labels", "pointer", "epsilon", "allow_weak_coupling", "numeric"});
    MeasurementSpec m;
    m.g = finite(required(n, "g", path), path + ".g");
    if (n["basis"]) {
        m.basis = complex_matrix(n["basis"], path + ".basis");
        if (m.basis->rows() != dim) fail(n["basis"], path + ".basis", "size does not match quantum_dim");
    }
    if (n["labels"]) {
        m.labels = scalar<std::vector<int>>(n["labels"], path + ".labels");
        if (static_cast<int>(m.labels.size()) != dim) fail(n["labels"], path + ".labels", "need one label per level");
    }
    if (n["pointer"]) {
        const GaussianSpec g = parse_gaussian(n["pointer"], path + ".pointer");
        m.pointer = PointerInit{g.x0, g.p0, g.var};
    }
    m.epsilon = n["epsilon"] ? finite(n["epsilon"], path + ".epsilon") : 1e-2;
    if (!(m.epsilon > 0.0)) fail(n["epsilon"], path + ".epsilon", "must be positive");
    m.allow_weak_coupling = value_or<bool>(n, "allow_weak_coupling", path, false);
    if (const YAML::Node k = n["numeric"]) {
        const std::string kp = path + ".numeric";
        check_keys(k, kp, {"steps", "min_steps", "courant", "band_scale", "band_width", "boundary_tol"});
        m.numeric.steps = value_or<int>(k, "steps", kp, m.numeric.steps);
        m.numeric.min_steps = value_or<int>(k, "min_steps", kp, m.numeric.min_steps);
        m.numeric.courant = value_or<double>(k, "courant", kp, m.numeric.courant);
        m.numeric.band_scale = value_or<double>(k, "band_scale", kp, m.numeric.band_scale);
        m.numeric.band_width = value_or<double>(k, "band_width", kp, m.numeric.band_width);
        m.numeric.boundary_tol = value_or<double>(k, "boundary_tol", kp, m.numeric.boundary_tol);
    }
    return m;
}

ModeAssignment parse_mode(const YAML::Node& n) {
    const std::string path = "mode";
    check_keys(n, path, {"n_max", "guard", "tail_tol"});
    try {
        ModeAssignment m(FockTruncation(value_or<int>(n, "n_max", path, 24)));
        m.guard = value_or<int>(n, "guard", path, m.guard);
        m.tail_tol = value_or<double>(n, "tail_tol", path, m.tail_tol);
        if (m.guard < 0 || m.guard >= m.trunc.n_max) fail(n, path + ".guard", "must lie in [0, n_max)");
        return m;
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(n, path, e.what());
    }
}

Matrix parse_mode_matrix(const YAML::Node& n, const ModeAssignment& mode, const std::string& path) {
    check_keys(n, path, {"fock", "fock_populations", "coherent", "matrix"});
    if (n.size() != 1) fail(n, path, "give exactly one of fock, fock_populations, coherent, matrix");
    const int n_max = mode.trunc.n_max;
    auto level = [&](const YAML::Node& e, const std::string& ep) {
        const int lv = scalar<int>(e, ep);
        if (lv < 0 || lv >= n_max) fail(e, ep, "Fock level outside 0.." + std::to_string(n_max - 1));
        return lv;
    };
    try {
        if (const YAML::Node f = n["fock"]) {
            if (!f.IsSequence() || f.size() == 0) fail(f, path + ".fock", "expected a list of [level, amplitude]");
            Vector v = Vector::Zero(n_max);
            for (std::size_t k = 0; k < f.size(); ++k) {
                const std::string ep = path + ".fock[" + std::to_string(k) + "]";
                if (!f[k].IsSequence() || f[k].size() != 2) fail(f[k], ep, "expected [level, amplitude]");
                v[level(f[k][0], ep + "[0]")] += complex_entry(f[k][1], ep + "[1]");
            }
            if (v.norm() == 0.0) fail(f, path + ".fock", "zero vector");
            v.normalize();
            return v * v.adjoint();
        }
        if (const YAML::Node f = n["fock_populations"]) {
            if (!f.IsSequence() || f.size() == 0) fail(f, path + ".fock_populations", "expected [level, weight] pairs");
            Matrix m = Matrix::Zero(n_max, n_max);
            for (std::size_t k = 0; k < f.size(); ++k) {
                const std::string ep = path + ".fock_populations[" + std::to_string(k) + "]";
                if (!f[k].IsSequence() || f[k].size() != 2) fail(f[k], ep, "expected [level, weight]");
                const int lv = level(f[k][0], ep + "[0]");
                m(lv, lv) += finite(f[k][1], ep + "[1]");
            }
            return m;
        }
        if (const YAML::Node c = n["coherent"]) {
            const GaussianSpec g = parse_gaussian(c, path + ".coherent");
            const Vector v = coherent_state(g.x0, g.p0, mode.trunc);
            return v * v.adjoint();
        }
        Matrix m = complex_matrix(n["matrix"], path + ".matrix");
        if (m.rows() != n_max) fail(n["matrix"], path + ".matrix", "size must equal n_max");
        return m;
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(n, path, e.what());
    }
}

Polynomial parse_polynomial(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() == 0) fail(n, path, "expected a list of monomials");
    Polynomial poly;
    for (std::size_t k = 0; k < n.size(); ++k) {
        const std::string tp = path + "[" + std::to_string(k) + "]";
        check_keys(n[k], tp, {"x", "p", "coeff"});
        const int x = value_or<int>(n[k], "x", tp, 0), p = value_or<int>(n[k], "p", tp, 0);
        if (x < 0 || p < 0) fail(n[k], tp, "exponents must be non-negative");
        poly += Polynomial::monomial(x, p, n[k]["coeff"] ? finite(n[k]["coeff"], tp + ".coeff") : 1.0);
    }
    return poly;
}

std::vector<ObservableSpec> parse_observables(const YAML::Node& n) {
    const std::string path = "observables";
    if (!n.IsSequence() || n.size() == 0) fail(n, path, "expected a non-empty list");
    std::vector<ObservableSpec> out;
    for (std::size_t k = 0; k < n.size(); ++k) {
        const std::string op = path + "[" + std::to_string(k) + "]";
        check_keys(n[k], op, {"name", "poly", "bump"});
        ObservableSpec o;
        if (n[k]["poly"] && n[k]["bump"]) fail(n[k], op, "give either poly or bump");
        if (n[k]["poly"]) {
            o.poly = parse_polynomial(n[k]["poly"], op + ".poly");
            o.name = value_or<std::string>(n[k], "name", op, o.poly->str());
        } else if (const YAML::Node b = n[k]["bump"]) {
            check_keys(b, op + ".bump", {"sigma", "x0", "p0"});
            const double sigma = finite(required(b, "sigma", op + ".bump"), op + ".bump.sigma");
            if (!(sigma > 0.0)) fail(b, op + ".bump.sigma", "must be positive");
            o.bump = GaussianSpec{value_or<double>(b, "x0", op + ".bump", 0.0),
                                  value_or<double>(b, "p0", op + ".bump", 0.0), sigma * sigma};
            std::ostringstream name;
            name << "bump(sigma=" << sigma << ")";
            o.name = value_or<std::string>(n[k], "name", op, name.str());
        } else {
            fail(n[k], op, "observable needs poly or bump");
        }
        out.push_back(std::move(o));
    }
    return out;
}

// --- builders shared by validate and run -------------------------------------

template <typename F>
auto as_config(const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const StabilityError&) {
        throw;
    } catch (const IllPosedError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

const PhaseGrid& need_grid(const Scenario& s) {
    if (!s.grid) throw ConfigError("grid: missing required field");
    return *s.grid;
}

DensityOperator quantum_state(const Scenario& s) {
    if (s.rho_q) return *s.rho_q;
    if (s.quantum_dim == 1) return DensityOperator(Matrix::Identity(1, 1));
    throw ConfigError("initial.quantum: missing required field for quantum_dim > 1");
}

HybridDensity initial_hybrid(const Scenario& s) {
    const PhaseGrid& grid = need_grid(s);
    if (!s.classical) throw ConfigError("initial.classical: missing required field");
    const DensityOperator rq = quantum_state(s);
    return as_config("initial.classical", [&] {
        return product_state(rq, gaussian(grid, s.classical->x0, s.classical->p0, s.classical->var));
    });
}

MeasurementConfig measurement_config(const Scenario& s) {
    if (!s.measurement) throw ConfigError("measurement: missing required field");
    const MeasurementSpec& m = *s.measurement;
    return as_config("measurement", [&] {
        const ProjectorSet base =
            m.basis ? ProjectorSet::from_basis(*m.basis) : ProjectorSet::diagonal(s.quantum_dim);
        std::vector<HermitianOperator> projs;
        for (std::size_t k = 0; k < base.size(); ++k) projs.push_back(base.projector(k));
        const ProjectorSet ps = m.labels.empty() ? base : ProjectorSet(projs, m.labels);
        return MeasurementConfig(ps, m.g, quantum_state(s), m.pointer, m.epsilon, m.allow_weak_coupling);
    });
}

Matrix enlarged_state(const Scenario& s) {
    if (!s.mode || !s.mode_state) throw ConfigError("mode/state: missing required field");
    const Matrix rest = quantum_state(s).matrix();
    const Matrix& a = s.mode_state->matrix();
    Matrix out(a.rows() * rest.rows(), a.cols() * rest.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * rest.rows(), j * rest.cols(), rest.rows(), rest.cols()) = a(i, j) * rest;
    return out;
}

HybridDensity shift_input(const Scenario& s) {
    if (s.mode_state) {
        const Matrix big = enlarged_state(s);
        return as_config("state", [&] { return dequantize(DensityOperator(big), *s.mode, need_grid(s)); });
    }
    return initial_hybrid(s);
}

std::vector<ShiftObservable> shift_observables(const Scenario& s) {
    std::vector<ShiftObservable> out;
    for (const auto& o : s.observables) {
        if (o.poly) {
            if (o.poly->degree() >= s.mode->trunc.n_max)
                throw ConfigError("observables: polynomial degree must stay below n_max");
            out.push_back(ShiftObservable::polynomial(o.name, *o.poly));
        } else {
            ShiftObservable b = ShiftObservable::gaussian_bump(std::sqrt(o.bump->var), o.bump->x0, o.bump->p0);
            b.name = o.name;
            out.push_back(std::move(b));
        }
    }
    return out;
}

bool is_measurement(ScenarioKind k) {
    return k == ScenarioKind::MeasurementClosed || k == ScenarioKind::MeasurementNumeric;
}
bool is_evolution(ScenarioKind k) {
    return k == ScenarioKind::ClassicalLimit || k == ScenarioKind::QuantumLimit || k == ScenarioKind::HybridEvolve;
}

nlohmann::json moments(const ScalarField& f) {
    const PhaseGrid& g = f.grid();
    double m0 = 0.0, mx = 0.0, mp = 0.0, mxx = 0.0, mpp = 0.0;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) {
            const double v = f(i, j), x = g.x(i), p = g.p(j);
            m0 += v;
            mx += v * x;
            mp += v * p;
            mxx += v * x * x;
            mpp += v * p * p;
        }
    mx /= m0;
    mp /= m0;
    return {{"mass", m0 * g.cell_area()},
            {"mean_x", mx},
            {"mean_p", mp},
            {"var_x", mxx / m0 - mx * mx},
            {"var_p", mpp / m0 - mp * mp}};
}

nlohmann::json positivity_json(const HybridDensity& h) {
    const PositivityDiagnostic d = h.positivity();
    return {{"min_eigenvalue", d.min_eigenvalue}, {"x", d.x}, {"p", d.p}, {"violations", d.violations}};
}

Matrix unitary_evolve(const Matrix& h, const Matrix& rho, double t) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    Vector phase(h.rows());
    for (Eigen::Index k = 0; k < phase.size(); ++k) phase[k] = std::polar(1.0, -es.eigenvalues()[k] * t);
    const Matrix u = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
    return u * rho * u.adjoint();
}

// --- runners -------------------------------------------------------------------

void run_evolution(const Scenario& s, ScenarioResult& res) {
    const HybridDensity h0 = initial_hybrid(s);
    const LiouvillianTermList terms = scenario_terms(s);
    EvolveDiagnostics diag;
    const HybridDensity h1 = evolve(h0, terms, s.evolve->t_final, s.evolve->dt, s.evolve->options, &diag);

    nlohmann::json& r = res.report;
    r["evolution"] = {{"t_final", s.evolve->t_final}, {"steps", diag.steps}, {"dt", diag.dt}};
    r["conservation"] = {{"normalization_initial", h0.normalization()},
                         {"normalization_final", h1.normalization()},
                         {"max_drift", diag.max_drift},
                         {"drift_per_time", diag.drift_per_time},
                         {"max_hermiticity_defect", std::max(diag.max_hermiticity_defect, h1.field().hermiticity_defect())}};
    r["positivity"] = positivity_json(h1);
    const ScalarField marg = classical_marginal(h1);
    r["classical_moments"] = moments(marg);
    const DensityOperator qm = quantum_marginal(h1);
    r["quantum_marginal"] = to_json(qm.matrix());

    std::vector<std::pair<double, double>> probes = s.probes;
    if (probes.empty()) probes.emplace_back(s.classical->x0, s.classical->p0);
    nlohmann::json pj = nlohmann::json::array();
    Matrix h_static = Matrix::Zero(s.quantum_dim, s.quantum_dim);
    for (const auto& t : s.hamiltonian)
        if (t.x == 0 && t.p == 0) h_static += t.coeff * t.op;
    const Matrix oracle = unitary_evolve(h_static, quantum_state(s).matrix(), s.evolve->t_final);
    double worst = 0.0;
    for (const auto& [x, p] : probes) {
        nlohmann::json e{{"x", x}, {"p", p}};
        try {
            const DensityOperator c = conditional_state(h1, x, p);
            e["state"] = to_json(c.matrix());
            if (s.kind == ScenarioKind::QuantumLimit) {
                const double td = trace_distance(c.matrix(), oracle);
                e["oracle_trace_distance"] = td;
                worst = std::max(worst, td);
            }
        } catch (const UnsupportedPoint& u) {
            e["unsupported"] = u.what();
        }
        pj.push_back(std::move(e));
    }
    r["probes"] = std::move(pj);
    if (s.kind == ScenarioKind::QuantumLimit) {
        r["oracle"] = {{"max_conditional_trace_distance", worst},
                       {"marginal_trace_distance", trace_distance(qm.matrix(), oracle)},
                       {"state", to_json(oracle)}};
    }
    res.files.add(s.outputs.marginal, to_csv(marg));
}

nlohmann::json collapse_json(const HybridDensity& final_state, const MeasurementConfig& cfg, double* worst) {
    nlohmann::json out = nlohmann::json::array();
    *worst = 0.0;
    for (const auto& o : projective_oracle(cfg.rho_i, cfg.ps)) {
        const double x = cfg.pointer.x0 + cfg.g * o.label, p = cfg.pointer.p0;
        nlohmann::json e{{"label", o.label}, {"x", x}, {"p", p}, {"probability", o.probability}};
        try {
            const DensityOperator c = conditional_state(final_state, x, p);
            const double td = trace_distance(c.matrix(), o.state.matrix());
            e["trace_distance"] = td;
            *worst = std::max(*worst, td);
        } catch (const UnsupportedPoint& u) {
            e["unsupported"] = u.what();
            *worst = std::max(*worst, 1.0);
        }
        out.push_back(std::move(e));
    }
    return out;
}

void run_measurement(const Scenario& s, ScenarioResult& res) {
    const MeasurementConfig cfg = measurement_config(s);
    const PhaseGrid& grid = need_grid(s);
    const HybridDensity init = as_config("grid", [&] { return measurement_initial_state(cfg, grid); });
    const HybridDensity closed = kick_closed_form(cfg, init);
    const bool numeric = s.kind == ScenarioKind::MeasurementNumeric;
    const HybridDensity final_state = numeric ? kick_numeric(cfg, init, s.measurement->numeric) : closed;

    nlohmann::json& r = res.report;
    const OutcomeReport rep = outcome_statistics(final_state, cfg, &init);
    r["outcome_report"] = to_json(rep);
    nlohmann::json proj = nlohmann::json::array();
    for (const auto& o : projective_oracle(cfg.rho_i, cfg.ps))
        proj.push_back({{"label", o.label}, {"probability", o.probability}, {"state", to_json(o.state.matrix())}});
    r["projective"] = std::move(proj);

    double max_path_dev = 0.0, max_mass_dev = 0.0;
    for (const auto& o : rep.outcomes)
        for (const auto& q : projective_oracle(cfg.rho_i, cfg.ps))
            if (q.label == o.label) {
                max_path_dev = std::max(max_path_dev, std::abs(o.path_mass - q.probability));
                max_mass_dev = std::max(max_mass_dev, std::abs(o.mass - q.probability));
            }
    double max_ratio_dev = 0.0;
    for (const auto& b : rep.blocks) max_ratio_dev = std::max(max_ratio_dev, std::abs(b.ratio - b.expected));
    r["summary"] = {{"max_path_mass_deviation_from_projective", max_path_dev},
                    {"max_window_mass_deviation_from_projective", max_mass_dev},
                    {"max_damping_deviation", max_ratio_dev}};

    double worst = 0.0;
    r["collapse"] = collapse_json(final_state, cfg, &worst);
    r["summary"]["max_collapse_trace_distance"] = worst;

    if (numeric) {
        double linf = 0.0;
        for (std::size_t q = 0; q < closed.field().data().size(); ++q)
            linf = std::max(linf, std::abs(closed.field().data()[q] - final_state.field().data()[q]));
        const OutcomeReport crep = outcome_statistics(closed, cfg, &init);
        double mass_gap = 0.0;
        for (std::size_t k = 0; k < std::min(crep.outcomes.size(), rep.outcomes.size()); ++k)
            mass_gap = std::max({mass_gap, std::abs(crep.outcomes[k].mass - rep.outcomes[k].mass),
                                 std::abs(crep.outcomes[k].path_mass - rep.outcomes[k].path_mass)});
        r["closed_form_comparison"] = {{"linf", linf}, {"max_mass_difference", mass_gap}};
    }
    const double drift = std::abs(final_state.normalization() - init.normalization());
    r["conservation"] = {{"normalization_initial", init.normalization()},
                         {"normalization_final", final_state.normalization()},
                         {"pulse_duration", cfg.epsilon},
                         {"drift_per_time", drift / cfg.epsilon},
                         {"max_hermiticity_defect", final_state.field().hermiticity_defect()}};
    r["positivity"] = positivity_json(final_state);
    res.files.add(s.outputs.marginal, to_csv(classical_marginal(final_state)));
}

void run_cut_shift(const Scenario& s, ScenarioResult& res) {
    const DensityOperator big(enlarged_state(s));
    const HybridDensity h = shift_input(s);
    const QuantizeResult q = quantize(h, *s.mode, s.quantize);
    nlohmann::json& r = res.report;
    r["roundtrip"] = {{"trace_distance", trace_distance(q.state.matrix(), big.matrix())},
                      {"residual", q.residual},
                      {"min_eigenvalue", q.min_eigenvalue},
                      {"clipped_weight", q.clipped_weight}};
    r["husimi"] = {{"positivity", positivity_json(h)}, {"moments", moments(classical_marginal(h))}};
    r["reconstructed_state"] = to_json(q.state.matrix());
    nlohmann::json cons{{"normalization_final", h.normalization()},
                        {"max_hermiticity_defect", h.field().hermiticity_defect()}};
    if (s.dynamics) {
        const ShiftDynamicsResult d =
            shift_dynamics_check(big, *s.mode, need_grid(s), s.dynamics->t_final, s.dynamics->samples, s.dynamics->dt);
        r["dynamics"] = {{"times", d.times}, {"linf", d.linf}, {"max_linf", d.max_linf}, {"steps", d.evolve.steps}};
        cons["drift_per_time"] = d.evolve.drift_per_time;
        cons["max_hermiticity_defect"] =
            std::max(cons["max_hermiticity_defect"].get<double>(), d.evolve.max_hermiticity_defect);
    }
    r["conservation"] = std::move(cons);
    res.files.add(s.outputs.marginal, to_csv(classical_marginal(h)));
}

void run_robustness(const Scenario& s, ScenarioResult& res) {
    const HybridDensity h = shift_input(s);
    const ShiftReport rep = robustness_check(h, shift_observables(s), *s.mode, s.quantize);
    res.report["shift_report"] = to_json(rep);
    res.report["conservation"] = {{"normalization_final", h.normalization()},
                                  {"max_hermiticity_defect", h.field().hermiticity_defect()}};
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < rep.observables.size(); ++k) {
        const auto& o = rep.observables[k];
        rows.push_back({static_cast<double>(k), o.hybrid, o.quantum, o.delta});
    }
    res.files.add("observables.csv", csv_table({"index", "hybrid", "quantum", "delta"}, rows));
    res.files.add(s.outputs.marginal, to_csv(classical_marginal(h)));
}

}  // namespace

std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::ClassicalLimit: return "classical_limit";
        case ScenarioKind::QuantumLimit: return "quantum_limit";
        case ScenarioKind::HybridEvolve: return "hybrid_evolve";
        case ScenarioKind::MeasurementClosed: return "measurement_closed";
        case ScenarioKind::MeasurementNumeric: return "measurement_numeric";
        case ScenarioKind::CutShiftRoundtrip: return "cut_shift_roundtrip";
        case ScenarioKind::RobustnessSweep: return "robustness_sweep";
    }
    return "unknown";
}

namespace {

Scenario parse_root(const std::string& text, const std::vector<std::string>& overrides, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    if (!root || !root.IsMap()) throw ConfigError(source + ": top level must be a mapping");
    for (const auto& o : overrides) apply_override(root, o);

    check_keys(root, "", {"kind", "name", "quantum_dim", "grid", "hamiltonian", "initial", "evolve", "probes",
                          "measurement", "mode", "state", "observables", "dynamics", "quantize", "outputs"});
    Scenario s;
    s.kind = parse_kind(required(root, "kind", ""));
    s.name = value_or<std::string>(root, "name", "", "");
    s.quantum_dim = value_or<int>(root, "quantum_dim", "", 1);
    if (s.quantum_dim < 1) fail(root["quantum_dim"], "quantum_dim", "must be at least 1");
    s.grid = parse_grid(required(root, "grid", ""));
    if (const YAML::Node h = root["hamiltonian"]) s.hamiltonian = parse_hamiltonian(h, s.quantum_dim);
    if (const YAML::Node init = root["initial"]) {
        check_keys(init, "initial", {"quantum", "classical"});
        if (init["quantum"]) s.rho_q = parse_quantum_state(init["quantum"], s.quantum_dim, "initial.quantum");
        if (init["classical"]) s.classical = parse_gaussian(init["classical"], "initial.classical");
    }
    if (const YAML::Node e = root["evolve"]) s.evolve = parse_evolve(e);
    if (const YAML::Node pr = root["probes"]) {
        if (!pr.IsSequence()) fail(pr, "probes", "expected a list of [x, p]");
        for (std::size_t k = 0; k < pr.size(); ++k) {
            const std::string pp = "probes[" + std::to_string(k) + "]";
            if (!pr[k].IsSequence() || pr[k].size() != 2) fail(pr[k], pp, "expected [x, p]");
            s.probes.emplace_back(finite(pr[k][0], pp + "[0]"), finite(pr[k][1], pp + "[1]"));
        }
    }
    if (const YAML::Node m = root["measurement"]) s.measurement = parse_measurement(m, s.quantum_dim);
    if (const YAML::Node m = root["mode"]) s.mode = parse_mode(m);
    if (const YAML::Node st = root["state"]) {
        if (!s.mode) s.mode = ModeAssignment{};
        const Matrix m = parse_mode_matrix(st, *s.mode, "state");
        try {
            s.mode_state = DensityOperator(m);
        } catch (const Error& e) {
            fail(st, "state", e.what());
        }
    }
    if (const YAML::Node o = root["observables"]) s.observables = parse_observables(o);
    if (const YAML::Node d = root["dynamics"]) {
        check_keys(d, "dynamics", {"t_final", "samples", "dt"});
        DynamicsSpec ds;
        ds.t_final = finite(required(d, "t_final", "dynamics"), "dynamics.t_final");
        ds.samples = value_or<int>(d, "samples", "dynamics", ds.samples);
        ds.dt = value_or<double>(d, "dt", "dynamics", ds.dt);
        if (ds.samples < 1) fail(d, "dynamics.samples", "must be at least 1");
        if (!(ds.dt > 0.0)) fail(d, "dynamics.dt", "must be positive");
        s.dynamics = ds;
    }
    if (const YAML::Node q = root["quantize"]) {
        check_keys(q, "quantize", {"residual_tol", "clip_tol", "max_rows"});
        s.quantize.residual_tol = value_or<double>(q, "residual_tol", "quantize", s.quantize.residual_tol);
        s.quantize.clip_tol = value_or<double>(q, "clip_tol", "quantize", s.quantize.clip_tol);
        s.quantize.max_rows = value_or<std::size_t>(q, "max_rows", "quantize", s.quantize.max_rows);
    }
    if (const YAML::Node o = root["outputs"]) {
        check_keys(o, "outputs", {"report", "marginal"});
        s.outputs.report = value_or<std::string>(o, "report", "outputs", s.outputs.report);
        s.outputs.marginal = value_or<std::string>(o, "marginal", "outputs", s.outputs.marginal);
        for (const auto& name : {s.outputs.report, s.outputs.marginal})
            if (name.empty() || std::filesystem::path(name).is_absolute() || name.find("..") != std::string::npos)
                fail(o, "outputs", "output names must be relative paths inside the output directory");
    }
    return s;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides, const std::string& source) {
    try {
        return parse_root(text, overrides, source);
    } catch (const YAML::Exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_scenario(text, overrides, path.string());
}

HybridPolynomialHamiltonian build_hamiltonian(const Scenario& s) {
    return as_config("hamiltonian", [&] {
        HybridPolynomialHamiltonian h(s.quantum_dim);
        for (const auto& t : s.hamiltonian) h.add(t.x, t.p, HermitianOperator(t.coeff * t.op), t.op_name);
        return h;
    });
}

LiouvillianTermList scenario_terms(const Scenario& s) {
    if (is_measurement(s.kind)) return compile(kick_hamiltonian(measurement_config(s)));
    return compile(build_hamiltonian(s));
}

nlohmann::json validate(const Scenario& s) {
    nlohmann::json checks = nlohmann::json::array();
    const PhaseGrid& grid = need_grid(s);
    checks.push_back("grid");
    if (is_evolution(s.kind)) {
        if (!s.evolve) throw ConfigError("evolve: missing required field");
        for (std::size_t k = 0; k < s.hamiltonian.size(); ++k) {
            const auto& t = s.hamiltonian[k];
            const std::string tp = "hamiltonian[" + std::to_string(k) + "]";
            const bool scalar_op =
                (t.op - t.op(0, 0) * Matrix::Identity(s.quantum_dim, s.quantum_dim)).cwiseAbs().maxCoeff() <= 1e-14;
            if (s.kind == ScenarioKind::ClassicalLimit && !scalar_op)
                throw ConfigError(tp + ": classical_limit needs operators proportional to the identity");
            if (s.kind == ScenarioKind::QuantumLimit && (t.x != 0 || t.p != 0))
                throw ConfigError(tp + ": quantum_limit needs terms independent of x and p");
        }
        const LiouvillianTermList terms = scenario_terms(s);
        checks.push_back("hamiltonian");
        const HybridDensity h0 = initial_hybrid(s);
        checks.push_back("initial_state");
        if (terms.has_derivatives())
            as_config("initial.classical", [&] {
                for (int r = 0; r < h0.dim(); ++r)
                    for (int c = 0; c < h0.dim(); ++c) check_boundary(grid, h0.field().entry(r, c), s.evolve->options.boundary_tol);
                return 0;
            });
        if (s.evolve->t_final > 0.0 && !terms.empty()) {
            const LiouvillianOperator op(terms, grid);
            const int steps = static_cast<int>(std::ceil(s.evolve->t_final / s.evolve->dt - 1e-9));
            const double h = s.evolve->t_final / steps, limit = op.max_stable_dt(s.evolve->options.courant);
            if (h > limit * (1.0 + 1e-12)) {
                std::ostringstream msg;
                msg << "evolve.dt: step " << h << " exceeds the stability bound " << limit;
                throw StabilityError(msg.str());
            }
        }
        checks.push_back("stability");
    } else if (is_measurement(s.kind)) {
        const MeasurementConfig cfg = measurement_config(s);
        checks.push_back("measurement");
        as_config("grid", [&] { return measurement_initial_state(cfg, grid); });
        checks.push_back("initial_state");
        if (s.kind == ScenarioKind::MeasurementNumeric && s.measurement->numeric.steps > 0) {
            const LiouvillianOperator op(compile(kick_hamiltonian(cfg)), grid);
            if (1.0 / s.measurement->numeric.steps > op.max_stable_dt(s.measurement->numeric.courant))
                throw StabilityError("measurement.numeric.steps is below the stability bound");
        }
        checks.push_back("stability");
    } else {
        if (!s.mode) throw ConfigError("mode: missing required field");
        if (s.kind == ScenarioKind::CutShiftRoundtrip) {
            if (!s.mode_state) throw ConfigError("state: missing required field");
            if (s.dynamics && s.quantum_dim != 1) throw ConfigError("dynamics: needs quantum_dim 1");
        } else {
            if (s.observables.empty()) throw ConfigError("observables: missing required field");
            shift_observables(s);
            checks.push_back("observables");
        }
        shift_input(s);
        checks.push_back("state");
    }
    return {{"kind", to_string(s.kind)}, {"name", s.name}, {"grid", grid_to_json(grid)}, {"checks", checks}};
}

ScenarioResult run(const Scenario& s) {
    validate(s);
    ScenarioResult res;
    res.report["kind"] = to_string(s.kind);
    res.report["name"] = s.name;
    res.report["grid"] = grid_to_json(need_grid(s));
    if (is_evolution(s.kind))
        run_evolution(s, res);
    else if (is_measurement(s.kind))
        run_measurement(s, res);
    else if (s.kind == ScenarioKind::CutShiftRoundtrip)
        run_cut_shift(s, res);
    else
        run_robustness(s, res);
    res.files.add(s.outputs.report, dump_json(res.report));
    return res;
}

ScenarioResult run_to_directory(const Scenario& s, const std::filesystem::path& out_dir) {
    ScenarioResult res = run(s);
    res.files.commit(out_dir);
    return res;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const StabilityError*>(&e) || dynamic_cast<const BoundaryLeakError*>(&e)) return 3;
    if (dynamic_cast<const IllPosedError*>(&e)) return 4;
    return 1;
}

}  // namespace hybrid
