#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybrid/hybrid_state.hpp"
#include "hybrid/operator_core.hpp"
#include "hybrid/polynomial.hpp"

namespace hybrid {

inline constexpr int kDefaultMaxDegree = 4;

/// One monomial x^a p^b multiplying a Hermitian operator.
struct HamiltonianTerm {
    Exponents exponents;
    HermitianOperator coeff;
    std::string name;
};

/// H(x, p) = sum_k x^a_k p^b_k C_k. Scalar parts carry identity coefficients.
class HybridPolynomialHamiltonian {
public:
    explicit HybridPolynomialHamiltonian(int dim, int max_degree = kDefaultMaxDegree);

    HybridPolynomialHamiltonian& add(int x_pow, int p_pow, HermitianOperator coeff, std::string name = {});
    /// Adds poly(x, p) * identity; poly must be real.
    HybridPolynomialHamiltonian& add_scalar(const Polynomial& poly);

    int dim() const { return dim_; }
    int max_degree() const { return max_degree_; }
    const std::vector<HamiltonianTerm>& terms() const { return terms_; }

private:
    int dim_;
    int max_degree_;
    std::vector<HamiltonianTerm> terms_;
};

enum class Side { Left, Right };

/// side == Left:  coeff(x, p) * op * (d_x^dx d_p^dp rho)
/// side == Right: coeff(x, p) * (d_x^dx d_p^dp rho) * op
struct LiouvillianTerm {
    Side side;
    Matrix op;
    std::string op_name;
    Polynomial coeff;
    int dx = 0;
    int dp = 0;
};

class LiouvillianTermList {
public:
    explicit LiouvillianTermList(int dim, std::vector<LiouvillianTerm> terms = {});

    int dim() const { return dim_; }
    const std::vector<LiouvillianTerm>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    bool has_derivatives() const;
    int max_derivative_order() const;

    /// Every left term has a right partner with conjugated coefficient and adjoint operator.
    bool is_conjugation_closed(double tol = 0.0) const;

    LiouvillianTermList scaled(double s) const;

    /// One line per term: "<side> op=<name> d=(dx,dp) coeff=<polynomial>".
    std::string dump() const;

private:
    int dim_;
    std::vector<LiouvillianTerm> terms_;
};

/// Expands -i :H(x + (d_x + i d_p)/2, p + (d_p - i d_x)/2): rho + h.c. into
/// explicit terms. Multiplicative factors stay left of derivatives; operator
/// coefficients act from the left and their conjugate partners from the right.
/// Terms sharing a derivative index and a (proportional) operator are merged,
/// and terms whose coefficient cancels exactly are dropped.
LiouvillianTermList compile(const HybridPolynomialHamiltonian& h);

/// Generator bound to a grid: caches coefficient fields and the FFT engine.
class LiouvillianOperator {
public:
    LiouvillianOperator(const LiouvillianTermList& terms, const PhaseGrid& grid);
    ~LiouvillianOperator();
    LiouvillianOperator(const LiouvillianOperator&) = delete;
    LiouvillianOperator& operator=(const LiouvillianOperator&) = delete;

    const PhaseGrid& grid() const;
    int dim() const;

    /// out = L[in], complex-linear in `in`. Throws BoundaryLeakError when the
    /// generator differentiates and `in` does not decay at the boundary.
    void rate(const MatrixField& in, MatrixField& out, double boundary_tol = kBoundaryTol);

    /// Largest |drift| of the first-order derivative terms over the grid.
    double max_phase_speed() const;
    /// Crude spectral-radius bound of the non-transport part of the generator.
    double stiffness_bound() const;
    /// dt limit: courant * min(dx, dp) / max_phase_speed, also capped by the RK4
    /// stability interval for the remaining terms.
    double max_stable_dt(double courant) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Rate field L[rho] for a Hermitian state; Hermitian pointwise.
MatrixField apply(const LiouvillianTermList& terms, const HybridDensity& h, double boundary_tol = kBoundaryTol);
/// Complex-linear extension, used for block-wise propagation of non-Hermitian pieces.
MatrixField apply(const LiouvillianTermList& terms, const MatrixField& f, double boundary_tol = kBoundaryTol);

/// Fourier band along one axis kept after every step (others are zeroed).
struct BandLimit {
    Axis axis = Axis::P;
    double k_lo = -1e300;
    double k_hi = 1e300;
    double width = 0.0;  // erfc ramp width; 0 is a hard cut
};

struct EvolveOptions {
    double courant = 0.5;
    double boundary_tol = kBoundaryTol;
    /// Allowed |normalization change| per unit time.
    double drift_budget = 1e-6;
    std::optional<BandLimit> band_limit;
};

struct EvolveDiagnostics {
    int steps = 0;
    double dt = 0.0;
    double max_drift = 0.0;  // max |trace integral - initial| over steps
    double drift_per_time = 0.0;
    double max_hermiticity_defect = 0.0;
};

/// Classical fourth-order Runge-Kutta with fixed step (rounded down so that an
/// integer number of steps reaches t_final). Throws StabilityError when dt
/// exceeds the stability bound or the normalization drifts beyond budget.
HybridDensity evolve(const HybridDensity& h0, const LiouvillianTermList& terms, double t_final, double dt,
                     const EvolveOptions& opts = {}, EvolveDiagnostics* diag = nullptr);

/// Same integrator on a general (not necessarily Hermitian) matrix field.
MatrixField evolve_field(const MatrixField& f0, const LiouvillianTermList& terms, double t_final, double dt,
                         const EvolveOptions& opts = {}, EvolveDiagnostics* diag = nullptr);

}  // namespace hybrid
