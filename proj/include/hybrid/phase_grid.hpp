#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hybrid {

using cplx = std::complex<double>;

enum class Axis { X, P };

inline constexpr double kBoundaryTol = 1e-12;

/// Uniform periodic grid over [x_min, x_max) x [p_min, p_max).
/// Point (i, j) sits at (x_min + i dx, p_min + j dp) and is stored at i * n_p + j.
class PhaseGrid {
public:
    PhaseGrid(double x_min, double x_max, int n_x, double p_min, double p_max, int n_p);

    /// [-half_width, half_width)^2 with n points per axis.
    static PhaseGrid square(double half_width, int n);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double p_min() const { return p_min_; }
    double p_max() const { return p_max_; }
    int n_x() const { return n_x_; }
    int n_p() const { return n_p_; }
    std::size_t size() const { return static_cast<std::size_t>(n_x_) * static_cast<std::size_t>(n_p_); }

    double dx() const { return (x_max_ - x_min_) / n_x_; }
    double dp() const { return (p_max_ - p_min_) / n_p_; }
    double cell_area() const { return dx() * dp(); }
    double x(int i) const { return x_min_ + i * dx(); }
    double p(int j) const { return p_min_ + j * dp(); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_p_ + j; }

    /// Angular wavenumber of FFT bin k along an axis (Nyquist bin reported as negative).
    double wavenumber(Axis axis, int k) const;

    bool operator==(const PhaseGrid&) const = default;

private:
    double x_min_, x_max_;
    int n_x_;
    double p_min_, p_max_;
    int n_p_;
};

/// Real-valued field sampled on a PhaseGrid.
class ScalarField {
public:
    explicit ScalarField(PhaseGrid grid);
    ScalarField(PhaseGrid grid, std::vector<double> values);

    static ScalarField sample(const PhaseGrid& grid, const std::function<double(double, double)>& f);

    const PhaseGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
    double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }

    double max_abs() const;

private:
    PhaseGrid grid_;
    std::vector<double> values_;
};

/// FFT-backed spectral differentiation on a fixed grid. Holds FFTW plans and a
/// scratch buffer, so an instance must not be shared between threads.
class SpectralDifferentiator {
public:
    explicit SpectralDifferentiator(const PhaseGrid& grid);
    ~SpectralDifferentiator();
    SpectralDifferentiator(const SpectralDifferentiator&) = delete;
    SpectralDifferentiator& operator=(const SpectralDifferentiator&) = delete;

    const PhaseGrid& grid() const;

    /// out = d^order_x/dx d^order_p/dp in. `in` and `out` may alias.
    void derivative(std::span<const cplx> in, std::span<cplx> out, int order_x, int order_p);

    /// Zeroes every Fourier mode along `axis` whose wavenumber lies outside [k_lo, k_hi].
    /// With width > 0 the edges become erfc ramps of that width centred on k_lo and k_hi.
    void band_limit(std::span<cplx> data, Axis axis, double k_lo, double k_hi, double width = 0.0);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Largest magnitude on the outermost rows and columns of the grid.
double boundary_max(const PhaseGrid& grid, std::span<const cplx> values);
double boundary_max(const PhaseGrid& grid, std::span<const double> values);

/// Throws BoundaryLeakError when the field does not decay at the domain edge.
void check_boundary(const PhaseGrid& grid, std::span<const cplx> values, double tol = kBoundaryTol);

ScalarField derivative(const ScalarField& f, Axis axis, int order, double boundary_tol = kBoundaryTol);

/// Riemann sum dx dp sum f.
double integrate(const ScalarField& f);
double integrate(const PhaseGrid& grid, std::span<const double> values);

/// Normalized isotropic Gaussian exp(-((x-x0)^2 + (p-p0)^2)/(2 var)) / (2 pi var).
/// Throws DomainTooSmall unless six standard deviations fit inside the domain.
ScalarField gaussian(const PhaseGrid& grid, double x0, double p0, double var);

/// CSV with header "x,p,value", one row per grid point, 17 significant digits.
std::string to_csv(const ScalarField& f);
ScalarField from_csv(const PhaseGrid& grid, const std::string& text);

}  // namespace hybrid
