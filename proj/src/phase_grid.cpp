#include "hybrid/phase_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <numbers>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

PhaseGrid::PhaseGrid(double x_min, double x_max, int n_x, double p_min, double p_max, int n_p)
    : x_min_(x_min), x_max_(x_max), n_x_(n_x), p_min_(p_min), p_max_(p_max), n_p_(n_p) {
    if (n_x_ < 16 || n_p_ < 16) throw InvariantError("phase grid needs at least 16 points per axis");
    if (!(x_max_ > x_min_) || !(p_max_ > p_min_)) throw InvariantError("phase grid domain lengths must be positive");
    if (cell_area() > 1.0) throw InvariantError("grid cell area exceeds one Planck cell");
}

PhaseGrid PhaseGrid::square(double half_width, int n) {
    return PhaseGrid(-half_width, half_width, n, -half_width, half_width, n);
}

double PhaseGrid::wavenumber(Axis axis, int k) const {
    const int n = axis == Axis::X ? n_x_ : n_p_;
    const double length = axis == Axis::X ? x_max_ - x_min_ : p_max_ - p_min_;
    const int shifted = k < (n + 1) / 2 ? k : k - n;
    return 2.0 * std::numbers::pi * shifted / length;
}

ScalarField::ScalarField(PhaseGrid grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

ScalarField::ScalarField(PhaseGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw InvariantError("field size does not match grid");
    for (double v : values_)
        if (!std::isfinite(v)) throw InvariantError("field contains non-finite values");
}

ScalarField ScalarField::sample(const PhaseGrid& grid, const std::function<double(double, double)>& f) {
    std::vector<double> v(grid.size());
    for (int i = 0; i < grid.n_x(); ++i)
        for (int j = 0; j < grid.n_p(); ++j) v[grid.index(i, j)] = f(grid.x(i), grid.p(j));
    return ScalarField(grid, std::move(v));
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

// --- spectral engine -------------------------------------------------------

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct SpectralDifferentiator::Impl {
    explicit Impl(const PhaseGrid& g) : grid(g) {
        const int nx = g.n_x(), np = g.n_p();
        buffer = fftw_alloc_complex(g.size());
        auto* b = buffer;
        std::lock_guard lock(planner_mutex());
        // Transforms along p: contiguous rows.
        p_fwd = fftw_plan_many_dft(1, &np, nx, b, nullptr, 1, np, b, nullptr, 1, np, FFTW_FORWARD, FFTW_ESTIMATE);
        p_bwd = fftw_plan_many_dft(1, &np, nx, b, nullptr, 1, np, b, nullptr, 1, np, FFTW_BACKWARD, FFTW_ESTIMATE);
        // Transforms along x: stride n_p.
        x_fwd = fftw_plan_many_dft(1, &nx, np, b, nullptr, np, 1, b, nullptr, np, 1, FFTW_FORWARD, FFTW_ESTIMATE);
        x_bwd = fftw_plan_many_dft(1, &nx, np, b, nullptr, np, 1, b, nullptr, np, 1, FFTW_BACKWARD, FFTW_ESTIMATE);
        for (int k = 0; k < nx; ++k) kx.push_back(g.wavenumber(Axis::X, k));
        for (int k = 0; k < np; ++k) kp.push_back(g.wavenumber(Axis::P, k));
    }

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p_fwd);
        fftw_destroy_plan(p_bwd);
        fftw_destroy_plan(x_fwd);
        fftw_destroy_plan(x_bwd);
        fftw_free(buffer);
    }

    cplx* data() { return reinterpret_cast<cplx*>(buffer); }

    // Multiplier for (i k)^order, with the Nyquist bin dropped for odd orders.
    static std::vector<cplx> multipliers(const std::vector<double>& ks, int order) {
        const int n = static_cast<int>(ks.size());
        std::vector<cplx> m(ks.size());
        for (int k = 0; k < n; ++k) {
            if (order % 2 == 1 && n % 2 == 0 && k == n / 2) {
                m[k] = 0.0;
                continue;
            }
            m[k] = std::pow(cplx(0.0, ks[k]), order) / static_cast<double>(n);
        }
        return m;
    }

    void along_p(int order) {
        const auto m = multipliers(kp, order);
        fftw_execute(p_fwd);
        cplx* d = data();
        const int nx = grid.n_x(), np = grid.n_p();
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < np; ++j) d[i * np + j] *= m[j];
        fftw_execute(p_bwd);
    }

    void along_x(int order) {
        const auto m = multipliers(kx, order);
        fftw_execute(x_fwd);
        cplx* d = data();
        const int nx = grid.n_x(), np = grid.n_p();
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < np; ++j) d[i * np + j] *= m[i];
        fftw_execute(x_bwd);
    }

    PhaseGrid grid;
    fftw_complex* buffer = nullptr;
    fftw_plan p_fwd{}, p_bwd{}, x_fwd{}, x_bwd{};
    std::vector<double> kx, kp;
};

SpectralDifferentiator::SpectralDifferentiator(const PhaseGrid& grid) : impl_(std::make_unique<Impl>(grid)) {}

SpectralDifferentiator::~SpectralDifferentiator() = default;

const PhaseGrid& SpectralDifferentiator::grid() const { return impl_->grid; }

void SpectralDifferentiator::derivative(std::span<const cplx> in, std::span<cplx> out, int order_x, int order_p) {
    const std::size_t n = impl_->grid.size();
    if (in.size() != n || out.size() != n) throw InvariantError("field size does not match grid");
    std::memmove(impl_->data(), in.data(), n * sizeof(cplx));
    if (order_p > 0) impl_->along_p(order_p);
    if (order_x > 0) impl_->along_x(order_x);
    std::memcpy(out.data(), impl_->data(), n * sizeof(cplx));
}

void SpectralDifferentiator::band_limit(std::span<cplx> data, Axis axis, double k_lo, double k_hi, double width) {
    auto mask = [&](double k) {
        if (width <= 0.0) return (k < k_lo || k > k_hi) ? 0.0 : 1.0;
        return 0.25 * std::erfc((k - k_hi) / width) * std::erfc((k_lo - k) / width);
    };
    const std::size_t n = impl_->grid.size();
    if (data.size() != n) throw InvariantError("field size does not match grid");
    const int nx = impl_->grid.n_x(), np = impl_->grid.n_p();
    std::memcpy(impl_->data(), data.data(), n * sizeof(cplx));
    cplx* d = impl_->data();
    if (axis == Axis::P) {
        fftw_execute(impl_->p_fwd);
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < np; ++j) {
                d[i * np + j] *= mask(impl_->kp[j]) / np;
            }
        fftw_execute(impl_->p_bwd);
    } else {
        fftw_execute(impl_->x_fwd);
        for (int i = 0; i < nx; ++i) {
            const double m = mask(impl_->kx[i]) / nx;
            for (int j = 0; j < np; ++j) d[i * np + j] *= m;
        }
        fftw_execute(impl_->x_bwd);
    }
    std::memcpy(data.data(), d, n * sizeof(cplx));
}

// --- field operations ------------------------------------------------------

namespace {
template <typename T>
double boundary_max_impl(const PhaseGrid& g, std::span<const T> v) {
    double m = 0.0;
    const int nx = g.n_x(), np = g.n_p();
    for (int j = 0; j < np; ++j) {
        m = std::max(m, std::abs(v[g.index(0, j)]));
        m = std::max(m, std::abs(v[g.index(nx - 1, j)]));
    }
    for (int i = 0; i < nx; ++i) {
        m = std::max(m, std::abs(v[g.index(i, 0)]));
        m = std::max(m, std::abs(v[g.index(i, np - 1)]));
    }
    return m;
}
}  // namespace

double boundary_max(const PhaseGrid& grid, std::span<const cplx> values) {
    return boundary_max_impl(grid, values);
}

double boundary_max(const PhaseGrid& grid, std::span<const double> values) {
    return boundary_max_impl(grid, values);
}

void check_boundary(const PhaseGrid& grid, std::span<const cplx> values, double tol) {
    const double b = boundary_max(grid, values);
    if (b > tol) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "field magnitude %.3g at domain boundary exceeds %.3g", b, tol);
        throw BoundaryLeakError(msg);
    }
}

ScalarField derivative(const ScalarField& f, Axis axis, int order, double boundary_tol) {
    if (order < 1) throw InvariantError("derivative order must be positive");
    const PhaseGrid& g = f.grid();
    if (boundary_max(g, f.values()) > boundary_tol) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "field magnitude %.3g at domain boundary exceeds %.3g",
                      boundary_max(g, f.values()), boundary_tol);
        throw BoundaryLeakError(msg);
    }
    std::vector<cplx> work(f.values().begin(), f.values().end());
    SpectralDifferentiator diff(g);
    diff.derivative(work, work, axis == Axis::X ? order : 0, axis == Axis::P ? order : 0);
    std::vector<double> out(work.size());
    std::transform(work.begin(), work.end(), out.begin(), [](cplx c) { return c.real(); });
    return ScalarField(g, std::move(out));
}

double integrate(const PhaseGrid& grid, std::span<const double> values) {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_area();
}

double integrate(const ScalarField& f) { return integrate(f.grid(), f.values()); }

ScalarField gaussian(const PhaseGrid& grid, double x0, double p0, double var) {
    if (!(var > 0.0)) throw InvariantError("Gaussian variance must be positive");
    const double reach = 6.0 * std::sqrt(var);
    if (x0 - reach < grid.x_min() || x0 + reach > grid.x_max() || p0 - reach < grid.p_min() ||
        p0 + reach > grid.p_max())
        throw DomainTooSmall("Gaussian does not fit six standard deviations inside the grid");
    const double norm = 1.0 / (2.0 * std::numbers::pi * var);
    return ScalarField::sample(grid, [=](double x, double p) {
        return norm * std::exp(-((x - x0) * (x - x0) + (p - p0) * (p - p0)) / (2.0 * var));
    });
}

std::string to_csv(const ScalarField& f) {
    const PhaseGrid& g = f.grid();
    std::string out = "x,p,value\n";
    out.reserve(g.size() * 72);
    char line[96];
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) {
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", g.x(i), g.p(j), f(i, j));
            out += line;
        }
    return out;
}

ScalarField from_csv(const PhaseGrid& grid, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "x,p,value") throw IoError("CSV header must be x,p,value");
    std::vector<double> values;
    values.reserve(grid.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double x = 0, p = 0, v = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &p, &v) != 3) throw IoError("malformed CSV row: " + line);
        values.push_back(v);
    }
    if (values.size() != grid.size()) throw IoError("CSV row count does not match grid");
    return ScalarField(grid, std::move(values));
}

}  // namespace hybrid
