#include "hybrid/operator_core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

Matrix hermitize(const Matrix& m) { return (m + m.adjoint()) * 0.5; }

// sqrt(n! / (n-k)!)
double falling_sqrt(int n, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= std::sqrt(static_cast<double>(n - i));
    return r;
}

// Rewrites x^a p^b with x = (alpha + conj(alpha))/sqrt2, p = (alpha - conj(alpha))/(i sqrt2).
// The result is returned as a Polynomial whose first exponent counts conj(alpha)
// and whose second counts alpha.
Polynomial to_ladder_symbols(const Polynomial& poly) {
    const double r = 1.0 / std::numbers::sqrt2;
    const Polynomial xs = Polynomial::monomial(1, 0, r) + Polynomial::monomial(0, 1, r);
    const Polynomial ps =
        Polynomial::monomial(1, 0, cplx(0.0, r)) + Polynomial::monomial(0, 1, cplx(0.0, -r));
    Polynomial out;
    for (const auto& [e, c] : poly.terms()) {
        Polynomial term(c);
        for (int i = 0; i < e.x; ++i) term = term * xs;
        for (int i = 0; i < e.p; ++i) term = term * ps;
        out += term;
    }
    return out;
}

void check_orderable(const Polynomial& poly, const FockTruncation& trunc) {
    if (!poly.is_real()) throw InvariantError("ordering requires a polynomial with real coefficients");
    if (poly.degree() >= trunc.n_max)
        throw TruncationError("polynomial degree " + std::to_string(poly.degree()) +
                              " is not below the Fock cutoff " + std::to_string(trunc.n_max));
}

}  // namespace

HermitianOperator::HermitianOperator(Matrix m, double tol) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
        throw InvariantError("Hermitian operator must be a non-empty square matrix");
    if (hermiticity_defect(m_) > tol)
        throw InvariantError("matrix is not Hermitian (defect " + std::to_string(hermiticity_defect(m_)) + ")");
}

HermitianOperator HermitianOperator::identity(int dim) {
    return HermitianOperator(Matrix::Identity(dim, dim));
}

HermitianOperator HermitianOperator::zero(int dim) { return HermitianOperator(Matrix::Zero(dim, dim)); }

Eigen::VectorXd HermitianOperator::eigenvalues() const {
    return Eigen::SelfAdjointEigenSolver<Matrix>(m_, Eigen::EigenvaluesOnly).eigenvalues();
}

HermitianOperator HermitianOperator::operator+(const HermitianOperator& o) const {
    if (o.dim() != dim()) throw InvariantError("dimension mismatch in operator sum");
    return HermitianOperator(m_ + o.m_);
}

DensityOperator::DensityOperator(Matrix m, double trace_tol, double positivity_tol) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
        throw InvariantError("density operator must be a non-empty square matrix");
    if (hermiticity_defect(m_) > kHermitianTol * std::max(1.0, m_.cwiseAbs().maxCoeff()))
        throw InvariantError("density operator is not Hermitian");
    const double tr = m_.trace().real();
    if (std::abs(tr - 1.0) > trace_tol)
        throw NormalizationError("density operator trace " + std::to_string(tr) + " differs from 1");
    if (min_eigenvalue() < -positivity_tol) throw InvariantError("density operator has a negative eigenvalue");
}

DensityOperator DensityOperator::pure(const Vector& psi) {
    const Vector v = psi / psi.norm();
    return DensityOperator(v * v.adjoint());
}

DensityOperator DensityOperator::maximally_mixed(int dim) {
    return DensityOperator(Matrix::Identity(dim, dim) / static_cast<double>(dim));
}

DensityOperator DensityOperator::diagonal(const std::vector<double>& populations) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(populations.size()),
                            static_cast<Eigen::Index>(populations.size()));
    for (std::size_t i = 0; i < populations.size(); ++i) m(i, i) = populations[i];
    return DensityOperator(m);
}

double DensityOperator::min_eigenvalue() const {
    return Eigen::SelfAdjointEigenSolver<Matrix>(hermitize(m_), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

ProjectorSet::ProjectorSet(std::vector<HermitianOperator> projectors, std::vector<int> labels)
    : projectors_(std::move(projectors)), labels_(std::move(labels)) {
    if (projectors_.empty()) throw InvariantError("projector set is empty");
    if (labels_.size() != projectors_.size()) throw InvariantError("one label per projector is required");
    const int d = projectors_.front().dim();
    Matrix sum = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < projectors_.size(); ++i) {
        const Matrix& p = projectors_[i].matrix();
        if (p.rows() != d) throw InvariantError("projectors differ in dimension");
        if ((p * p - p).cwiseAbs().maxCoeff() > kIdempotentTol) throw InvariantError("projector is not idempotent");
        for (std::size_t j = 0; j < i; ++j)
            if ((p * projectors_[j].matrix()).cwiseAbs().maxCoeff() > kIdempotentTol)
                throw InvariantError("projectors are not mutually orthogonal");
        sum += p;
    }
    if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > kIdempotentTol)
        throw InvariantError("projectors do not sum to the identity");
}

ProjectorSet ProjectorSet::diagonal(int dim) { return from_basis(Matrix::Identity(dim, dim)); }

ProjectorSet ProjectorSet::from_basis(const Matrix& unitary) {
    std::vector<HermitianOperator> ps;
    std::vector<int> labels;
    for (Eigen::Index k = 0; k < unitary.cols(); ++k) {
        const Vector v = unitary.col(k);
        ps.emplace_back(hermitize(v * v.adjoint()));
        labels.push_back(static_cast<int>(k) + 1);
    }
    return ProjectorSet(std::move(ps), std::move(labels));
}

FockTruncation::FockTruncation(int n) : n_max(n) {
    if (n_max < 2) throw InvariantError("Fock cutoff must be at least 2");
}

HermitianOperator pointer_observable(const ProjectorSet& ps, double g) {
    Matrix a = Matrix::Zero(ps.dim(), ps.dim());
    for (std::size_t k = 0; k < ps.size(); ++k) a += (g * ps.label(k)) * ps.projector(k).matrix();
    return HermitianOperator(hermitize(a));
}

double coherent_tail_mass(double x1, double p1, int n_max) {
    const double s = 0.5 * (x1 * x1 + p1 * p1);
    if (s == 0.0) return 0.0;
    double tail = 0.0;
    for (int n = n_max;; ++n) {
        const double term = std::exp(-s + n * std::log(s) - std::lgamma(n + 1.0));
        tail += term;
        if (n > s && term < 1e-30 * std::max(tail, 1e-300)) break;
        if (n > n_max + 100000) break;
    }
    return tail;
}

Vector coherent_state(double x1, double p1, const FockTruncation& trunc, double tail_tol) {
    const double tail = coherent_tail_mass(x1, p1, trunc.n_max);
    if (tail > tail_tol)
        throw TruncationError("coherent state tail mass " + std::to_string(tail) + " exceeds tolerance");
    const cplx alpha = cplx(x1, p1) / std::numbers::sqrt2;
    Vector v(trunc.n_max);
    v(0) = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < trunc.n_max; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
    return v / v.norm();
}

Matrix annihilation(int n) {
    Matrix a = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

Matrix creation(int n) { return annihilation(n).adjoint(); }

Matrix position(int n) { return (annihilation(n) + creation(n)) / std::numbers::sqrt2; }

Matrix momentum(int n) { return (annihilation(n) - creation(n)) / cplx(0.0, std::numbers::sqrt2); }

HermitianOperator order_normal(const Polynomial& poly, const FockTruncation& trunc) {
    check_orderable(poly, trunc);
    const int n = trunc.n_max;
    Matrix out = Matrix::Zero(n, n);
    // <m| a^dag^j a^k |l> = sqrt(l!/(l-k)!) sqrt(m!/(m-j)!) when m - j == l - k
    const Polynomial ladder = to_ladder_symbols(poly);
    for (const auto& [e, c] : ladder.terms()) {
        const int j = e.x, k = e.p;
        for (int l = k; l < n; ++l) {
            const int m = l - k + j;
            if (m >= n) continue;
            out(m, l) += c * falling_sqrt(l, k) * falling_sqrt(m, j);
        }
    }
    return HermitianOperator(hermitize(out));
}

HermitianOperator order_antinormal(const Polynomial& poly, const FockTruncation& trunc) {
    check_orderable(poly, trunc);
    const int n = trunc.n_max;
    Matrix out = Matrix::Zero(n, n);
    // a^k a^dag^j |l> = sqrt((l+j)!/l!) sqrt((l+j)!/(l+j-k)!) |l+j-k>
    const Polynomial ladder = to_ladder_symbols(poly);
    for (const auto& [e, c] : ladder.terms()) {
        const int j = e.x, k = e.p;
        for (int l = 0; l < n; ++l) {
            const int top = l + j;
            const int m = top - k;
            if (m < 0 || m >= n) continue;
            out(m, l) += c * falling_sqrt(top, j) * falling_sqrt(top, k);
        }
    }
    return HermitianOperator(hermitize(out));
}

HermitianOperator order_weyl(const Polynomial& poly, const FockTruncation& trunc) {
    check_orderable(poly, trunc);
    const int n = trunc.n_max;
    const int padded = n + poly.degree() + 1;
    const Matrix xq = position(padded);
    const Matrix pq = momentum(padded);
    auto power = [padded](const Matrix& m, int k) {
        Matrix r = Matrix::Identity(padded, padded);
        for (int i = 0; i < k; ++i) r = r * m;
        return r;
    };
    Matrix out = Matrix::Zero(padded, padded);
    // x^a p^b -> 2^-a sum_k C(a,k) x^k p^b x^(a-k)
    for (const auto& [e, c] : poly.terms()) {
        const Matrix pb = power(pq, e.p);
        double binom = 1.0;
        for (int k = 0; k <= e.x; ++k) {
            out += (c * binom / std::ldexp(1.0, e.x)) * (power(xq, k) * pb * power(xq, e.x - k));
            binom = binom * (e.x - k) / (k + 1);
        }
    }
    return HermitianOperator(hermitize(out.topLeftCorner(n, n)));
}

double trace_distance(const Matrix& a, const Matrix& b) {
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Matrix>(hermitize(a - b), Eigen::EigenvaluesOnly).eigenvalues();
    return 0.5 * ev.cwiseAbs().sum();
}

double hermiticity_defect(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

nlohmann::json to_json(const Matrix& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) entries.push_back({m(i, j).real(), m(i, j).imag()});
    return {{"dim", m.rows()}, {"entries", entries}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    if (!j.contains("dim") || !j.contains("entries")) throw InvariantError("operator JSON needs dim and entries");
    const auto dim = j.at("dim").get<Eigen::Index>();
    const auto& entries = j.at("entries");
    if (dim <= 0 || entries.size() != static_cast<std::size_t>(dim * dim))
        throw InvariantError("operator JSON entry count does not match dim");
    Matrix m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index k = 0; k < dim; ++k) {
            const auto& e = entries.at(static_cast<std::size_t>(i * dim + k));
            m(i, k) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
        }
    return m;
}

}  // namespace hybrid
