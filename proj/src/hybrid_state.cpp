#include "hybrid/hybrid_state.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "hybrid/errors.hpp"

namespace hybrid {

MatrixField::MatrixField(PhaseGrid grid, int dim)
    : grid_(std::move(grid)), dim_(dim), data_(static_cast<std::size_t>(dim) * dim * grid_.size()) {
    if (dim_ < 1) throw InvariantError("matrix field dimension must be positive");
}

std::span<cplx> MatrixField::entry(int r, int c) {
    return {data_.data() + (static_cast<std::size_t>(r) * dim_ + c) * points(), points()};
}

std::span<const cplx> MatrixField::entry(int r, int c) const {
    return {data_.data() + (static_cast<std::size_t>(r) * dim_ + c) * points(), points()};
}

bool MatrixField::entry_is_zero(int r, int c) const {
    const auto e = entry(r, c);
    return std::all_of(e.begin(), e.end(), [](cplx v) { return v == cplx(0.0); });
}

Matrix MatrixField::at(std::size_t point) const {
    Matrix m(dim_, dim_);
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) m(r, c) = entry(r, c)[point];
    return m;
}

void MatrixField::set(std::size_t point, const Matrix& m) {
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) entry(r, c)[point] = m(r, c);
}

void MatrixField::axpy(cplx a, const MatrixField& other) {
    if (other.dim_ != dim_ || other.data_.size() != data_.size()) throw InvariantError("matrix field shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += a * other.data_[k];
}

void MatrixField::scale(cplx a) {
    for (auto& v : data_) v *= a;
}

double MatrixField::max_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
}

double MatrixField::hermiticity_defect() const {
    double d = 0.0;
    for (int r = 0; r < dim_; ++r)
        for (int c = r; c < dim_; ++c) {
            const auto a = entry(r, c);
            const auto b = entry(c, r);
            for (std::size_t k = 0; k < points(); ++k) d = std::max(d, std::abs(a[k] - std::conj(b[k])));
        }
    return d;
}

void MatrixField::hermitize() {
    for (int r = 0; r < dim_; ++r)
        for (int c = r; c < dim_; ++c) {
            auto a = entry(r, c);
            auto b = entry(c, r);
            for (std::size_t k = 0; k < points(); ++k) {
                const cplx v = 0.5 * (a[k] + std::conj(b[k]));
                a[k] = v;
                b[k] = std::conj(v);
            }
        }
}

double MatrixField::trace_integral() const {
    double s = 0.0;
    for (int r = 0; r < dim_; ++r)
        for (const auto& v : entry(r, r)) s += v.real();
    return s * grid_.cell_area();
}

HybridDensity::HybridDensity(MatrixField field, double norm_tol) : field_(std::move(field)) {
    const double scale = std::max(1.0, field_.max_abs());
    if (field_.hermiticity_defect() > kStateHermitianTol * scale)
        throw InvariantError("hybrid density is not pointwise Hermitian");
    const double n = normalization();
    if (!std::isfinite(n) || std::abs(n - 1.0) > norm_tol)
        throw NormalizationError("hybrid density integrates to " + std::to_string(n));
}

PositivityDiagnostic HybridDensity::positivity(double tol) const {
    PositivityDiagnostic d;
    d.min_eigenvalue = std::numeric_limits<double>::infinity();
    const PhaseGrid& g = grid();
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) {
            const std::size_t k = g.index(i, j);
            double ev;
            if (dim() == 1) {
                ev = field_.entry(0, 0)[k].real();
            } else {
                solver.compute(field_.at(k), Eigen::EigenvaluesOnly);
                ev = solver.eigenvalues()(0);
            }
            if (ev < -tol) ++d.violations;
            if (ev < d.min_eigenvalue) {
                d.min_eigenvalue = ev;
                d.x = g.x(i);
                d.p = g.p(j);
            }
        }
    return d;
}

HybridObservable::HybridObservable(MatrixField values) : values_(std::move(values)) {
    if (values_.hermiticity_defect() > kHermitianTol * std::max(1.0, values_.max_abs()))
        throw InvariantError("hybrid observable is not pointwise Hermitian");
}

HybridObservable HybridObservable::from_polynomial(
    const PhaseGrid& grid, const std::vector<std::pair<Polynomial, HermitianOperator>>& terms) {
    if (terms.empty()) throw InvariantError("observable needs at least one term");
    const int dim = terms.front().second.dim();
    MatrixField f(grid, dim);
    for (const auto& [poly, op] : terms) {
        if (!poly.is_real()) throw InvariantError("observable polynomial must be real");
        if (op.dim() != dim) throw InvariantError("observable terms differ in dimension");
        for (int i = 0; i < grid.n_x(); ++i)
            for (int j = 0; j < grid.n_p(); ++j) {
                const double v = poly(grid.x(i), grid.p(j)).real();
                const std::size_t k = grid.index(i, j);
                for (int r = 0; r < dim; ++r)
                    for (int c = 0; c < dim; ++c) f.entry(r, c)[k] += v * op.matrix()(r, c);
            }
    }
    return HybridObservable(std::move(f));
}

HybridObservable HybridObservable::scalar(const ScalarField& f, int dim) {
    MatrixField m(f.grid(), dim);
    for (int r = 0; r < dim; ++r) {
        auto e = m.entry(r, r);
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = f.values()[k];
    }
    return HybridObservable(std::move(m));
}

HybridDensity product_state(const DensityOperator& rho_q, const ScalarField& rho_c) {
    const double n = integrate(rho_c);
    if (std::abs(n - 1.0) > kNormalizationTol)
        throw NormalizationError("classical density integrates to " + std::to_string(n));
    const double floor = -kHermitianTol * std::max(1.0, rho_c.max_abs());
    for (double v : rho_c.values())
        if (v < floor) throw NormalizationError("classical density is negative");
    const int dim = rho_q.dim();
    MatrixField f(rho_c.grid(), dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            const cplx q = rho_q.matrix()(r, c);
            if (q == cplx(0.0)) continue;
            auto e = f.entry(r, c);
            for (std::size_t k = 0; k < e.size(); ++k) e[k] = q * rho_c.values()[k];
        }
    return HybridDensity(std::move(f));
}

ScalarField classical_marginal(const HybridDensity& h) {
    std::vector<double> v(h.grid().size(), 0.0);
    for (int r = 0; r < h.dim(); ++r) {
        const auto e = h.field().entry(r, r);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += e[k].real();
    }
    return ScalarField(h.grid(), std::move(v));
}

DensityOperator quantum_marginal(const HybridDensity& h) {
    const int dim = h.dim();
    Matrix m(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            cplx s = 0.0;
            for (const auto& v : h.field().entry(r, c)) s += v;
            m(r, c) = s * h.grid().cell_area();
        }
    return DensityOperator((m + m.adjoint()) * 0.5, kNormalizationTol, kPositivityDiagTol);
}

DensityOperator conditional_state(const HybridDensity& h, double x, double p, double eps) {
    const PhaseGrid& g = h.grid();
    const double fx = (x - g.x_min()) / g.dx();
    const double fp = (p - g.p_min()) / g.dp();
    if (fx < 0.0 || fp < 0.0 || fx > g.n_x() - 1 || fp > g.n_p() - 1)
        throw UnsupportedPoint("conditional state requested outside the grid");
    const int i0 = std::min(static_cast<int>(fx), g.n_x() - 2);
    const int j0 = std::min(static_cast<int>(fp), g.n_p() - 2);
    const double tx = fx - i0, tp = fp - j0;
    Matrix m = Matrix::Zero(h.dim(), h.dim());
    const double w[4] = {(1 - tx) * (1 - tp), (1 - tx) * tp, tx * (1 - tp), tx * tp};
    const int di[4] = {0, 0, 1, 1}, dj[4] = {0, 1, 0, 1};
    for (int q = 0; q < 4; ++q)
        if (w[q] != 0.0) m += w[q] * h.at(i0 + di[q], j0 + dj[q]);
    const double tr = m.trace().real();
    if (!(tr > eps)) throw UnsupportedPoint("classical density below threshold; conditional state undefined");
    m /= tr;
    return DensityOperator((m + m.adjoint()) * 0.5, kTraceTol, 1e-6);
}

double expectation(const HybridDensity& h, const HybridObservable& f) {
    const MatrixField& fv = f.values();
    if (fv.dim() != h.dim() || !(fv.grid() == h.grid())) throw InvariantError("observable does not match state");
    const int dim = h.dim();
    cplx s = 0.0;
    // tr(F rho) = sum_{r,c} F_rc rho_cr
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            if (fv.entry_is_zero(r, c)) continue;
            const auto a = fv.entry(r, c);
            const auto b = h.field().entry(c, r);
            for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
        }
    return s.real() * h.grid().cell_area();
}

nlohmann::json grid_to_json(const PhaseGrid& g) {
    return {{"x_min", g.x_min()}, {"x_max", g.x_max()}, {"n_x", g.n_x()},
            {"p_min", g.p_min()}, {"p_max", g.p_max()}, {"n_p", g.n_p()}};
}

PhaseGrid grid_from_json(const nlohmann::json& j) {
    return PhaseGrid(j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("n_x").get<int>(),
                     j.at("p_min").get<double>(), j.at("p_max").get<double>(), j.at("n_p").get<int>());
}

nlohmann::json to_json(const HybridDensity& h) {
    nlohmann::json values = nlohmann::json::array();
    for (std::size_t k = 0; k < h.grid().size(); ++k) values.push_back(to_json(h.field().at(k))["entries"]);
    return {{"grid", grid_to_json(h.grid())}, {"dim", h.dim()}, {"values", values}};
}

HybridDensity hybrid_from_json(const nlohmann::json& j) {
    const PhaseGrid g = grid_from_json(j.at("grid"));
    const int dim = j.at("dim").get<int>();
    const auto& values = j.at("values");
    if (values.size() != g.size()) throw InvariantError("snapshot point count does not match grid");
    MatrixField f(g, dim);
    for (std::size_t k = 0; k < g.size(); ++k)
        f.set(k, matrix_from_json({{"dim", dim}, {"entries", values[k]}}));
    return HybridDensity(std::move(f));
}

namespace {
static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("truncated snapshot file");
    return v;
}
}  // namespace

void write_snapshot(const HybridDensity& h, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write("HYBD", 4);
    put<std::uint32_t>(out, 1);
    const PhaseGrid& g = h.grid();
    put(out, g.x_min());
    put(out, g.x_max());
    put(out, g.p_min());
    put(out, g.p_max());
    put<std::int32_t>(out, g.n_x());
    put<std::int32_t>(out, g.n_p());
    put<std::int32_t>(out, h.dim());
    for (std::size_t k = 0; k < g.size(); ++k)
        for (int r = 0; r < h.dim(); ++r)
            for (int c = 0; c < h.dim(); ++c) {
                const cplx v = h.field().entry(r, c)[k];
                put(out, v.real());
                put(out, v.imag());
            }
    if (!out) throw IoError("failed writing " + path.string());
}

HybridDensity read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "HYBD", 4) != 0) throw IoError("not a hybrid snapshot");
    if (get<std::uint32_t>(in) != 1) throw IoError("unsupported snapshot version");
    const double x_min = get<double>(in), x_max = get<double>(in);
    const double p_min = get<double>(in), p_max = get<double>(in);
    const int n_x = get<std::int32_t>(in), n_p = get<std::int32_t>(in);
    const int dim = get<std::int32_t>(in);
    MatrixField f(PhaseGrid(x_min, x_max, n_x, p_min, p_max, n_p), dim);
    for (std::size_t k = 0; k < f.points(); ++k)
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) {
                const double re = get<double>(in), im = get<double>(in);
                f.entry(r, c)[k] = cplx(re, im);
            }
    return HybridDensity(std::move(f));
}

}  // namespace hybrid
