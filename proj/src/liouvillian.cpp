#include "hybrid/liouvillian.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

// --- Hamiltonian -----------------------------------------------------------

HybridPolynomialHamiltonian::HybridPolynomialHamiltonian(int dim, int max_degree)
    : dim_(dim), max_degree_(max_degree) {
    if (dim_ < 1) throw InvariantError("Hamiltonian dimension must be positive");
}

HybridPolynomialHamiltonian& HybridPolynomialHamiltonian::add(int x_pow, int p_pow, HermitianOperator coeff,
                                                              std::string name) {
    if (x_pow < 0 || p_pow < 0) throw InvariantError("monomial exponents must be non-negative");
    if (x_pow + p_pow > max_degree_)
        throw DegreeError("monomial degree " + std::to_string(x_pow + p_pow) + " exceeds bound " +
                          std::to_string(max_degree_));
    if (coeff.dim() != dim_) throw InvariantError("operator coefficient has the wrong dimension");
    terms_.push_back({{x_pow, p_pow}, std::move(coeff), std::move(name)});
    return *this;
}

HybridPolynomialHamiltonian& HybridPolynomialHamiltonian::add_scalar(const Polynomial& poly) {
    if (!poly.is_real()) throw InvariantError("scalar Hamiltonian part must be real");
    for (const auto& [e, c] : poly.terms())
        add(e.x, e.p, HermitianOperator::identity(dim_) * c.real(), "I");
    return *this;
}

// --- term list -------------------------------------------------------------

LiouvillianTermList::LiouvillianTermList(int dim, std::vector<LiouvillianTerm> terms)
    : dim_(dim), terms_(std::move(terms)) {
    for (const auto& t : terms_)
        if (t.op.rows() != dim_ || t.op.cols() != dim_) throw InvariantError("term operator has the wrong dimension");
}

bool LiouvillianTermList::has_derivatives() const {
    return std::any_of(terms_.begin(), terms_.end(), [](const auto& t) { return t.dx + t.dp > 0; });
}

int LiouvillianTermList::max_derivative_order() const {
    int m = 0;
    for (const auto& t : terms_) m = std::max(m, t.dx + t.dp);
    return m;
}

bool LiouvillianTermList::is_conjugation_closed(double tol) const {
    auto matches = [tol](const LiouvillianTerm& a, const LiouvillianTerm& b) {
        if (a.dx != b.dx || a.dp != b.dp || a.side == b.side) return false;
        if ((a.op - b.op.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
        const Polynomial diff = a.coeff - b.coeff.conj();
        for (const auto& [e, c] : diff.terms())
            if (std::abs(c) > tol) return false;
        return true;
    };
    for (const auto& t : terms_)
        if (std::none_of(terms_.begin(), terms_.end(), [&](const auto& u) { return matches(t, u); })) return false;
    return true;
}

LiouvillianTermList LiouvillianTermList::scaled(double s) const {
    std::vector<LiouvillianTerm> out = terms_;
    for (auto& t : out) t.coeff *= s;
    return LiouvillianTermList(dim_, std::move(out));
}

std::string LiouvillianTermList::dump() const {
    std::ostringstream out;
    for (const auto& t : terms_) {
        out << (t.side == Side::Left ? "left " : "right") << " op=" << t.op_name << " d=(" << t.dx << "," << t.dp
            << ") coeff=" << t.coeff.str() << "\n";
    }
    return out.str();
}

namespace {

// Polynomial in (x, p, d_x, d_p), all treated as commuting symbols.
using Key4 = std::array<int, 4>;
using Poly4 = std::map<Key4, cplx>;

Poly4 multiply(const Poly4& a, const Poly4& b) {
    Poly4 out;
    for (const auto& [ka, ca] : a)
        for (const auto& [kb, cb] : b) {
            const Key4 k{ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2], ka[3] + kb[3]};
            out[k] += ca * cb;
        }
    std::erase_if(out, [](const auto& kv) { return kv.second == cplx(0.0); });
    return out;
}

struct OpSlot {
    Matrix op;
    std::string name;
};

// Finds an existing slot whose operator is a real multiple of m; returns index and factor.
std::pair<std::size_t, double> find_or_add(std::vector<OpSlot>& slots, const Matrix& m, const std::string& name) {
    const double norm_m = m.norm();
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const Matrix& o = slots[k].op;
        const double lambda = (o.adjoint() * m).trace().real() / o.squaredNorm();
        if ((m - lambda * o).norm() <= 1e-14 * std::max(norm_m, 1e-300)) return {k, lambda};
    }
    slots.push_back({m, name.empty() ? "C" + std::to_string(slots.size()) : name});
    return {slots.size() - 1, 1.0};
}

}  // namespace

LiouvillianTermList compile(const HybridPolynomialHamiltonian& h) {
    const int dim = h.dim();
    const Poly4 xs{{{1, 0, 0, 0}, 1.0}, {{0, 0, 1, 0}, 0.5}, {{0, 0, 0, 1}, cplx(0.0, 0.5)}};
    const Poly4 ps{{{0, 1, 0, 0}, 1.0}, {{0, 0, 0, 1}, 0.5}, {{0, 0, 1, 0}, cplx(0.0, -0.5)}};

    std::vector<OpSlot> slots;
    // (slot, dx, dp) -> coefficient polynomial in (x, p)
    std::map<std::array<int, 3>, Polynomial> acc;

    for (const auto& term : h.terms()) {
        if (term.exponents.degree() > h.max_degree()) throw DegreeError("Hamiltonian degree exceeds bound");
        const Matrix& c = term.coeff.matrix();
        if (c.cwiseAbs().maxCoeff() == 0.0) continue;
        Matrix op = c;
        std::string name = term.name;
        double scale = 1.0;
        const double diag = c(0, 0).real();
        if ((c - diag * Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff() == 0.0) {
            op = Matrix::Identity(dim, dim);
            name = "I";
            scale = diag;
        }
        auto [slot, lambda] = find_or_add(slots, op, name);
        scale *= lambda;

        Poly4 expanded{{{0, 0, 0, 0}, 1.0}};
        for (int i = 0; i < term.exponents.x; ++i) expanded = multiply(expanded, xs);
        for (int i = 0; i < term.exponents.p; ++i) expanded = multiply(expanded, ps);
        for (const auto& [k, v] : expanded) {
            auto& poly = acc[{static_cast<int>(slot), k[2], k[3]}];
            poly += Polynomial::monomial(k[0], k[1], cplx(0.0, -1.0) * scale * v);
        }
    }

    std::vector<LiouvillianTerm> left, right;
    for (const auto& [key, poly] : acc) {
        if (poly.is_zero()) continue;
        const OpSlot& s = slots[key[0]];
        left.push_back({Side::Left, s.op, s.name, poly, key[1], key[2]});
        right.push_back({Side::Right, s.op.adjoint(), s.name, poly.conj(), key[1], key[2]});
    }
    left.insert(left.end(), right.begin(), right.end());
    return LiouvillianTermList(dim, std::move(left));
}

// --- bound generator -------------------------------------------------------

namespace {
struct SparseEntry {
    int r, c;
    cplx v;
};
}  // namespace

struct LiouvillianOperator::Impl {
    struct BoundTerm {
        Side side;
        std::vector<SparseEntry> op;
        double op_norm;
        bool constant;
        cplx c0;
        std::vector<cplx> field;
        int deriv;  // index into derivs
        int dx, dp;
    };

    Impl(const LiouvillianTermList& tl, const PhaseGrid& g) : grid(g), dim(tl.dim()), diff(g) {
        for (const auto& t : tl.terms()) {
            BoundTerm b;
            b.side = t.side;
            for (int r = 0; r < dim; ++r)
                for (int c = 0; c < dim; ++c)
                    if (t.op(r, c) != cplx(0.0)) b.op.push_back({r, c, t.op(r, c)});
            b.op_norm = Eigen::JacobiSVD<Matrix>(t.op).singularValues()(0);
            b.constant = t.coeff.degree() == 0;
            b.c0 = t.coeff.coefficient(0, 0);
            if (!b.constant) {
                b.field.resize(g.size());
                for (int i = 0; i < g.n_x(); ++i)
                    for (int j = 0; j < g.n_p(); ++j) b.field[g.index(i, j)] = t.coeff(g.x(i), g.p(j));
            }
            b.dx = t.dx;
            b.dp = t.dp;
            std::pair<int, int> d{t.dx, t.dp};
            auto it = std::find(orders.begin(), orders.end(), d);
            if (it == orders.end()) {
                orders.push_back(d);
                b.deriv = static_cast<int>(orders.size()) - 1;
            } else {
                b.deriv = static_cast<int>(it - orders.begin());
            }
            terms.push_back(std::move(b));
        }
        has_derivatives = std::any_of(orders.begin(), orders.end(), [](auto d) { return d.first + d.second > 0; });
    }

    double coeff_abs_max(const BoundTerm& t) const {
        if (t.constant) return std::abs(t.c0);
        double m = 0.0;
        for (const auto& v : t.field) m = std::max(m, std::abs(v));
        return m;
    }

    PhaseGrid grid;
    int dim;
    SpectralDifferentiator diff;
    std::vector<BoundTerm> terms;
    std::vector<std::pair<int, int>> orders;
    std::vector<MatrixField> derivs;
    bool has_derivatives = false;
};

LiouvillianOperator::LiouvillianOperator(const LiouvillianTermList& terms, const PhaseGrid& grid)
    : impl_(std::make_unique<Impl>(terms, grid)) {}

LiouvillianOperator::~LiouvillianOperator() = default;

const PhaseGrid& LiouvillianOperator::grid() const { return impl_->grid; }

int LiouvillianOperator::dim() const { return impl_->dim; }

void LiouvillianOperator::rate(const MatrixField& in, MatrixField& out, double boundary_tol) {
    Impl& m = *impl_;
    const int dim = m.dim;
    if (in.dim() != dim || !(in.grid() == m.grid)) throw InvariantError("field does not match the generator");
    std::fill(out.data().begin(), out.data().end(), cplx(0.0));
    if (m.terms.empty()) return;

    std::vector<char> nonzero(static_cast<std::size_t>(dim) * dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) nonzero[r * dim + c] = !in.entry_is_zero(r, c);

    if (m.has_derivatives)
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                if (nonzero[r * dim + c]) check_boundary(m.grid, in.entry(r, c), boundary_tol);

    if (m.derivs.size() != m.orders.size()) {
        m.derivs.clear();
        for (std::size_t k = 0; k < m.orders.size(); ++k) m.derivs.emplace_back(m.grid, dim);
    }
    for (std::size_t d = 0; d < m.orders.size(); ++d) {
        const auto [ox, op] = m.orders[d];
        if (ox + op == 0) continue;
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                if (nonzero[r * dim + c]) m.diff.derivative(in.entry(r, c), m.derivs[d].entry(r, c), ox, op);
    }

    const std::size_t n = m.grid.size();
    for (const auto& t : m.terms) {
        const MatrixField& src = (t.dx + t.dp == 0) ? in : m.derivs[t.deriv];
        for (const auto& e : t.op) {
            for (int k = 0; k < dim; ++k) {
                // Left:  out(e.r, k) += coeff * e.v * D(e.c, k)
                // Right: out(k, e.c) += coeff * D(k, e.r) * e.v
                const int sr = t.side == Side::Left ? e.c : k;
                const int sc = t.side == Side::Left ? k : e.r;
                if (!nonzero[sr * dim + sc]) continue;
                const auto s = src.entry(sr, sc);
                auto o = t.side == Side::Left ? out.entry(e.r, k) : out.entry(k, e.c);
                if (t.constant) {
                    const cplx a = t.c0 * e.v;
                    for (std::size_t q = 0; q < n; ++q) o[q] += a * s[q];
                } else {
                    for (std::size_t q = 0; q < n; ++q) o[q] += t.field[q] * e.v * s[q];
                }
            }
        }
    }
}

double LiouvillianOperator::max_phase_speed() const {
    const Impl& m = *impl_;
    const PhaseGrid& g = m.grid;
    double speed = 0.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
        double vx = 0.0, vp = 0.0;
        for (const auto& t : m.terms) {
            if (t.dx + t.dp != 1) continue;
            const double c = (t.constant ? std::abs(t.c0) : std::abs(t.field[q])) * t.op_norm;
            (t.dx == 1 ? vx : vp) += c;
        }
        speed = std::max(speed, std::hypot(vx, vp));
    }
    return speed;
}

double LiouvillianOperator::stiffness_bound() const {
    const Impl& m = *impl_;
    const double kx = std::numbers::pi / m.grid.dx();
    const double kp = std::numbers::pi / m.grid.dp();
    double s = 0.0;
    for (const auto& t : m.terms) {
        if (t.dx + t.dp == 1) continue;
        s += m.coeff_abs_max(t) * t.op_norm * std::pow(kx, t.dx) * std::pow(kp, t.dp);
    }
    return s;
}

double LiouvillianOperator::max_stable_dt(double courant) const {
    double dt = std::numeric_limits<double>::infinity();
    const double speed = max_phase_speed();
    if (speed > 0.0) dt = std::min(dt, courant * std::min(impl_->grid.dx(), impl_->grid.dp()) / speed);
    const double stiff = stiffness_bound();
    // RK4 is stable on the imaginary axis up to 2 sqrt(2); keep some margin.
    if (stiff > 0.0) dt = std::min(dt, 2.5 / stiff);
    return dt;
}

MatrixField apply(const LiouvillianTermList& terms, const MatrixField& f, double boundary_tol) {
    if (terms.dim() != f.dim()) throw InvariantError("term list and field differ in dimension");
    LiouvillianOperator op(terms, f.grid());
    MatrixField out(f.grid(), f.dim());
    op.rate(f, out, boundary_tol);
    return out;
}

MatrixField apply(const LiouvillianTermList& terms, const HybridDensity& h, double boundary_tol) {
    MatrixField out = apply(terms, h.field(), boundary_tol);
    out.hermitize();
    return out;
}

// --- integrator ------------------------------------------------------------

namespace {

MatrixField integrate_rk4(const MatrixField& f0, const LiouvillianTermList& terms, double t_final, double dt,
                          const EvolveOptions& opts, bool hermitian, EvolveDiagnostics* diag) {
    if (!(t_final >= 0.0)) throw InvariantError("t_final must be non-negative");
    if (!(dt > 0.0)) throw InvariantError("time step must be positive");
    if (terms.dim() != f0.dim()) throw InvariantError("term list and state differ in dimension");
    EvolveDiagnostics d;
    if (t_final == 0.0 || terms.empty()) {
        if (diag) *diag = d;
        return f0;
    }
    const int steps = static_cast<int>(std::ceil(t_final / dt - 1e-9));
    const double h = t_final / steps;
    LiouvillianOperator op(terms, f0.grid());
    const double limit = op.max_stable_dt(opts.courant);
    if (h > limit * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "time step " << h << " exceeds stability bound " << limit;
        throw StabilityError(msg.str());
    }

    MatrixField y = f0;
    MatrixField k1(f0.grid(), f0.dim()), k2 = k1, k3 = k1, k4 = k1, tmp = k1;
    const double norm0 = y.trace_integral();
    std::optional<SpectralDifferentiator> band;
    if (opts.band_limit) band.emplace(f0.grid());

    auto stage = [&](const MatrixField& base, const MatrixField& k, double a) {
        for (std::size_t q = 0; q < tmp.data().size(); ++q) tmp.data()[q] = base.data()[q] + a * k.data()[q];
    };

    d.dt = h;
    for (int s = 0; s < steps; ++s) {
        op.rate(y, k1, opts.boundary_tol);
        stage(y, k1, 0.5 * h);
        op.rate(tmp, k2, opts.boundary_tol);
        stage(y, k2, 0.5 * h);
        op.rate(tmp, k3, opts.boundary_tol);
        stage(y, k3, h);
        op.rate(tmp, k4, opts.boundary_tol);
        auto& yd = y.data();
        for (std::size_t q = 0; q < yd.size(); ++q)
            yd[q] += (h / 6.0) * (k1.data()[q] + 2.0 * k2.data()[q] + 2.0 * k3.data()[q] + k4.data()[q]);

        if (band) {
            for (int r = 0; r < y.dim(); ++r)
                for (int c = 0; c < y.dim(); ++c)
                    if (!y.entry_is_zero(r, c))
                        band->band_limit(y.entry(r, c), opts.band_limit->axis, opts.band_limit->k_lo,
                                         opts.band_limit->k_hi, opts.band_limit->width);
        }
        if (hermitian) {
            d.max_hermiticity_defect = std::max(d.max_hermiticity_defect, y.hermiticity_defect());
            y.hermitize();
        }
        const double norm = y.trace_integral();
        if (!std::isfinite(norm) || !std::isfinite(y.max_abs()))
            throw StabilityError("state became non-finite at step " + std::to_string(s));
        const double drift = std::abs(norm - norm0);
        d.max_drift = std::max(d.max_drift, drift);
        const double elapsed = (s + 1) * h;
        if (drift > opts.drift_budget * std::max(1.0, elapsed)) {
            std::ostringstream msg;
            msg << "normalization drift " << drift << " exceeds budget at t=" << elapsed;
            throw StabilityError(msg.str());
        }
    }
    d.steps = steps;
    d.drift_per_time = d.max_drift / std::max(1.0, t_final);
    if (diag) *diag = d;
    return y;
}

}  // namespace

HybridDensity evolve(const HybridDensity& h0, const LiouvillianTermList& terms, double t_final, double dt,
                     const EvolveOptions& opts, EvolveDiagnostics* diag) {
    MatrixField f = integrate_rk4(h0.field(), terms, t_final, dt, opts, true, diag);
    const double tol = kNormalizationTol + opts.drift_budget * std::max(1.0, t_final);
    const double n0 = h0.normalization();
    // The result inherits whatever normalization defect the input carried.
    return HybridDensity(std::move(f), tol + std::abs(n0 - 1.0));
}

MatrixField evolve_field(const MatrixField& f0, const LiouvillianTermList& terms, double t_final, double dt,
                         const EvolveOptions& opts, EvolveDiagnostics* diag) {
    return integrate_rk4(f0, terms, t_final, dt, opts, false, diag);
}

}  // namespace hybrid
