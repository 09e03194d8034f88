#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybrid/hybrid_state.hpp"
#include "hybrid/liouvillian.hpp"
#include "hybrid/operator_core.hpp"

namespace hybrid {

/// The single classical pair (x, p) traded for one Fock mode. Enlarged-space
/// vectors are ordered mode (x) rest: index n * rest_dim + i.
struct ModeAssignment {
    explicit ModeAssignment(FockTruncation trunc = FockTruncation{}) : trunc(trunc) {}
    FockTruncation trunc;
    /// Populations of the top `guard` levels must vanish for maps to be exact.
    int guard = 4;
    double tail_tol = 1e-10;
};

/// Husimi map over the mode: rho(x, p) = <a|rho'|a> / (2 pi), a = (x + i p) / sqrt(2).
HybridDensity dequantize(const DensityOperator& rho_prime, const ModeAssignment& mode, const PhaseGrid& grid);

struct QuantizeOptions {
    double residual_tol = 1e-6;  // relative L2 misfit over the whole grid
    double clip_tol = 1e-8;      // eigenvalues in [-clip_tol, 0) are zeroed
    std::size_t max_rows = 4096;
    double weight_floor = 1e-12;  // rows are scaled by 1 / max(envelope, weight_floor)
};

struct QuantizeResult {
    DensityOperator state;
    double residual;        // relative misfit before clipping
    double min_eigenvalue;  // before clipping
    double clipped_weight;  // |sum of clipped eigenvalues|
};

/// Least-squares inverse of the Husimi map. Throws IllPosedError when h is
/// not a Husimi function at this truncation or the fit is too negative.
QuantizeResult quantize(const HybridDensity& h, const ModeAssignment& mode, const QuantizeOptions& opts = {});

/// Normal-ordered substitution of the pair; the result has no classical
/// dependence left and lives on the n_max * dim space.
HybridPolynomialHamiltonian quantize_hamiltonian(const HybridPolynomialHamiltonian& h, const ModeAssignment& mode);

/// sum_k Weyl(poly_k) (x) op_k.
HermitianOperator quantize_observable(const std::vector<std::pair<Polynomial, HermitianOperator>>& terms,
                                      const ModeAssignment& mode);
/// Scalar observable: Weyl(poly) (x) identity(rest_dim).
HermitianOperator quantize_observable(const Polynomial& poly, int rest_dim, const ModeAssignment& mode);
/// Anti-normal image, the exact counterpart of Husimi averaging.
HermitianOperator antinormal_observable(const Polynomial& poly, int rest_dim, const ModeAssignment& mode);

/// Wigner function over the mode, W(x, p) per rest block; integrates to tr rho'.
MatrixField wigner(const Matrix& rho_prime, int rest_dim, const ModeAssignment& mode, const PhaseGrid& grid);

/// Scalar phase-space observable f(x, p) (x) identity. Polynomials are checked
/// through operator orderings, other functions through the Wigner function.
struct ShiftObservable {
    std::string name;
    std::optional<Polynomial> poly;
    std::function<double(double, double)> fn;

    static ShiftObservable polynomial(std::string name, Polynomial p);
    static ShiftObservable function(std::string name, std::function<double(double, double)> f);
    /// exp(-((x - x0)^2 + (p - p0)^2) / (2 sigma^2))
    static ShiftObservable gaussian_bump(double sigma, double x0 = 0.0, double p0 = 0.0);
};

struct ObservableShift {
    std::string name;
    double hybrid;            // tr int F rho dx dp
    double quantum;           // tr rho' Weyl(F)
    double delta;             // |hybrid - quantum|
    std::optional<double> antinormal_gap;  // |Husimi average - tr rho' antinormal(F)|, polynomials only
};

struct ShiftReport {
    double roundtrip_trace_distance = 0.0;
    double residual = 0.0;
    double min_eigenvalue = 0.0;
    double clipped_weight = 0.0;
    double husimi_min = 0.0;
    double min_conditional_variance = 0.0;  // smallest per-quadrature variance of the mode's Husimi
    std::vector<ObservableShift> observables;
};

ShiftReport robustness_check(const HybridDensity& h, const std::vector<ShiftObservable>& observables,
                             const ModeAssignment& mode, const QuantizeOptions& opts = {});

nlohmann::json to_json(const ShiftReport& r);

struct ShiftDynamicsResult {
    std::vector<double> times;
    std::vector<double> linf;  // per sample time
    double max_linf = 0.0;
    EvolveDiagnostics evolve;
};

/// Harmonic-pointer check: rotate rho' with a^dag a and dequantize, versus
/// dequantize and transport under H = (x^2 + p^2) / 2. rho_prime must be a
/// state of the mode alone.
ShiftDynamicsResult shift_dynamics_check(const DensityOperator& rho_prime, const ModeAssignment& mode,
                                         const PhaseGrid& grid, double t_final, int samples, double dt);

}  // namespace hybrid
