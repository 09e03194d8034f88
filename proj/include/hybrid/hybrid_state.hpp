#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "hybrid/operator_core.hpp"
#include "hybrid/phase_grid.hpp"

namespace hybrid {

inline constexpr double kStateHermitianTol = 1e-10;
inline constexpr double kNormalizationTol = 1e-8;
inline constexpr double kPositivityDiagTol = 1e-8;
inline constexpr double kConditionalEps = 1e-12;

/// A dim x dim complex matrix at every grid point. Storage is entry-major:
/// entry (r, c) over the whole grid is one contiguous block, so each matrix
/// element can be handed to the FFT engine directly.
class MatrixField {
public:
    MatrixField(PhaseGrid grid, int dim);

    const PhaseGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    std::size_t points() const { return grid_.size(); }

    std::span<cplx> entry(int r, int c);
    std::span<const cplx> entry(int r, int c) const;
    bool entry_is_zero(int r, int c) const;

    Matrix at(std::size_t point) const;
    void set(std::size_t point, const Matrix& m);

    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    /// this += a * other
    void axpy(cplx a, const MatrixField& other);
    void scale(cplx a);

    double max_abs() const;
    /// max over points of max |M - M^dag|
    double hermiticity_defect() const;
    /// Replaces every point matrix by (M + M^dag)/2.
    void hermitize();
    /// Integral of the pointwise trace (real part).
    double trace_integral() const;

private:
    PhaseGrid grid_;
    int dim_;
    std::vector<cplx> data_;
};

struct PositivityDiagnostic {
    double min_eigenvalue = 0.0;
    double x = 0.0;
    double p = 0.0;
    std::size_t violations = 0;  // points whose min eigenvalue < -tol
};

/// Phase-space dependent density operator rho(x, p). Construction checks
/// pointwise Hermiticity and total normalization; positivity is only
/// reported through positivity().
class HybridDensity {
public:
    explicit HybridDensity(MatrixField field, double norm_tol = kNormalizationTol);

    const PhaseGrid& grid() const { return field_.grid(); }
    int dim() const { return field_.dim(); }
    const MatrixField& field() const { return field_; }
    Matrix at(int i, int j) const { return field_.at(grid().index(i, j)); }

    double normalization() const { return field_.trace_integral(); }
    PositivityDiagnostic positivity(double tol = kPositivityDiagTol) const;

private:
    MatrixField field_;
};

/// Hermitian-operator valued function F(x, p) on the grid.
class HybridObservable {
public:
    explicit HybridObservable(MatrixField values);

    /// sum_k poly_k(x, p) * op_k, with real polynomials.
    static HybridObservable from_polynomial(const PhaseGrid& grid,
                                            const std::vector<std::pair<Polynomial, HermitianOperator>>& terms);
    /// f(x, p) * identity
    static HybridObservable scalar(const ScalarField& f, int dim);

    const MatrixField& values() const { return values_; }

private:
    MatrixField values_;
};

HybridDensity product_state(const DensityOperator& rho_q, const ScalarField& rho_c);
ScalarField classical_marginal(const HybridDensity& h);
DensityOperator quantum_marginal(const HybridDensity& h);

/// rho(x, p) / tr rho(x, p), bilinearly interpolated between grid nodes
/// (exact on nodes). Throws UnsupportedPoint where the classical density is
/// below eps or the point lies outside the grid.
DensityOperator conditional_state(const HybridDensity& h, double x, double p, double eps = kConditionalEps);

/// tr \int F rho dx dp
double expectation(const HybridDensity& h, const HybridObservable& f);

nlohmann::json grid_to_json(const PhaseGrid& g);
PhaseGrid grid_from_json(const nlohmann::json& j);

/// Snapshot: grid metadata plus per-point matrices in operator JSON form.
nlohmann::json to_json(const HybridDensity& h);
HybridDensity hybrid_from_json(const nlohmann::json& j);

/// Binary snapshot: "HYBD", u32 version, grid (4 f64 + 2 i32), i32 dim, then
/// point-major row-major complex<f64> matrices, little endian.
void write_snapshot(const HybridDensity& h, const std::filesystem::path& path);
HybridDensity read_snapshot(const std::filesystem::path& path);

}  // namespace hybrid
