#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <vector>

#include "hybrid/polynomial.hpp"

namespace hybrid {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPositivityTol = 1e-10;
inline constexpr double kIdempotentTol = 1e-12;

/// Dense Hermitian matrix. Construction validates Hermiticity.
class HermitianOperator {
public:
    explicit HermitianOperator(Matrix m, double tol = kHermitianTol);

    static HermitianOperator identity(int dim);
    static HermitianOperator zero(int dim);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Matrix& matrix() const { return m_; }
    Eigen::VectorXd eigenvalues() const;

    HermitianOperator operator*(double s) const { return HermitianOperator(m_ * s); }
    HermitianOperator operator+(const HermitianOperator& o) const;

private:
    Matrix m_;
};

/// Unit-trace positive semidefinite Hermitian matrix.
class DensityOperator {
public:
    explicit DensityOperator(Matrix m, double trace_tol = kTraceTol,
                             double positivity_tol = kPositivityTol);

    static DensityOperator pure(const Vector& psi);
    static DensityOperator maximally_mixed(int dim);
    static DensityOperator diagonal(const std::vector<double>& populations);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Matrix& matrix() const { return m_; }
    double min_eigenvalue() const;

private:
    Matrix m_;
};

/// Complete orthogonal set of Hermitian projectors with integer labels.
class ProjectorSet {
public:
    ProjectorSet(std::vector<HermitianOperator> projectors, std::vector<int> labels);

    /// Rank-one projectors onto the computational basis, labels 1..dim.
    static ProjectorSet diagonal(int dim);
    /// Rank-one projectors onto the columns of a unitary, labels 1..dim.
    static ProjectorSet from_basis(const Matrix& unitary);

    int dim() const { return projectors_.front().dim(); }
    std::size_t size() const { return projectors_.size(); }
    const HermitianOperator& projector(std::size_t k) const { return projectors_[k]; }
    int label(std::size_t k) const { return labels_[k]; }
    const std::vector<int>& labels() const { return labels_; }

private:
    std::vector<HermitianOperator> projectors_;
    std::vector<int> labels_;
};

/// Fock-space cutoff: levels 0 .. n_max-1 are represented.
struct FockTruncation {
    explicit FockTruncation(int n_max = 24);
    int n_max;
};

/// g * sum_n n P_n.
HermitianOperator pointer_observable(const ProjectorSet& ps, double g);

/// Poisson tail mass of the coherent state (x1 + i p1)/sqrt(2) beyond level n_max-1.
double coherent_tail_mass(double x1, double p1, int n_max);

/// Normalized eigenvector of x + ip with eigenvalue x1 + i p1 in the truncated Fock basis.
/// Throws TruncationError when the discarded tail mass exceeds tail_tol.
Vector coherent_state(double x1, double p1, const FockTruncation& trunc, double tail_tol = 1e-10);

/// Truncated ladder and quadrature matrices, a = (x + ip)/sqrt(2).
Matrix annihilation(int n);
Matrix creation(int n);
Matrix position(int n);
Matrix momentum(int n);

/// Operator images of a real polynomial in (x1, p1) under the three standard
/// orderings. Matrices are exact compressions of the infinite-dimensional
/// operators onto the first n_max levels.
HermitianOperator order_normal(const Polynomial& poly, const FockTruncation& trunc);
HermitianOperator order_weyl(const Polynomial& poly, const FockTruncation& trunc);
HermitianOperator order_antinormal(const Polynomial& poly, const FockTruncation& trunc);

double trace_distance(const Matrix& a, const Matrix& b);
double hermiticity_defect(const Matrix& m);

/// {"dim": n, "entries": [[re, im], ...]} with entries in row-major order.
nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace hybrid
