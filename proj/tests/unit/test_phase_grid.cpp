#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hybrid/errors.hpp"
#include "hybrid/phase_grid.hpp"

using namespace hybrid;

namespace {

double gauss(double x, double p, double x0, double p0, double var) {
    return std::exp(-((x - x0) * (x - x0) + (p - p0) * (p - p0)) / (2 * var)) / (2 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("grid geometry and validation") {
    const PhaseGrid g = PhaseGrid::square(8.0, 64);
    CHECK(g.dx() == doctest::Approx(0.25));
    CHECK(g.x(0) == -8.0);
    CHECK(g.p(63) == doctest::Approx(7.75));
    CHECK_THROWS_AS(PhaseGrid(0, 1, 8, 0, 1, 32), InvariantError);
    CHECK_THROWS_AS(PhaseGrid::square(40.0, 32), InvariantError);
}

TEST_CASE("sampled Gaussian integrates to one") {
    const PhaseGrid g = PhaseGrid::square(10.0, 80);
    const ScalarField f = gaussian(g, 1.0, -0.5, 1.0);
    CHECK(std::abs(integrate(f) - 1.0) < 1e-12);
    CHECK(std::abs(f(40, 30) - gauss(g.x(40), g.p(30), 1.0, -0.5, 1.0)) < 1e-15);
    CHECK_THROWS_AS(gaussian(g, 5.0, 0.0, 1.0), DomainTooSmall);
    CHECK_THROWS_AS(gaussian(g, 0.0, 0.0, -1.0), InvariantError);
}

TEST_CASE("spectral derivatives match analytic Gaussian derivatives") {
    const PhaseGrid g = PhaseGrid::square(10.0, 64);
    const ScalarField f = gaussian(g, 0.5, -1.0, 1.0);
    const ScalarField fx = derivative(f, Axis::X, 1);
    const ScalarField fpp = derivative(f, Axis::P, 2);
    double ex = 0.0, epp = 0.0;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) {
            const double x = g.x(i), p = g.p(j), v = gauss(x, p, 0.5, -1.0, 1.0);
            ex = std::max(ex, std::abs(fx(i, j) + (x - 0.5) * v));
            epp = std::max(epp, std::abs(fpp(i, j) - ((p + 1.0) * (p + 1.0) - 1.0) * v));
        }
    CHECK(ex < 1e-10);
    CHECK(epp < 1e-10);
}

TEST_CASE("differentiating a field that touches the boundary is refused") {
    const PhaseGrid g = PhaseGrid::square(8.0, 32);
    const ScalarField wide = ScalarField::sample(g, [](double x, double p) { return std::exp(-(x * x + p * p) / 18.0); });
    CHECK_THROWS_AS(derivative(wide, Axis::X, 1), BoundaryLeakError);
}

TEST_CASE("band limit removes the upper part of the spectrum") {
    const PhaseGrid g = PhaseGrid::square(std::numbers::pi, 32);
    SpectralDifferentiator d(g);
    std::vector<cplx> data(g.size());
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) data[g.index(i, j)] = std::cos(2.0 * g.p(j)) + std::cos(9.0 * g.p(j));
    d.band_limit(data, Axis::P, -5.0, 5.0);
    double err = 0.0;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) err = std::max(err, std::abs(data[g.index(i, j)] - std::cos(2.0 * g.p(j))));
    CHECK(err < 1e-13);
}

TEST_CASE("CSV round trip is exact") {
    const PhaseGrid g = PhaseGrid::square(6.0, 32);
    const ScalarField f = gaussian(g, 0.3, 0.1, 0.7);
    const std::string text = to_csv(f);
    CHECK(text.rfind("x,p,value\n", 0) == 0);
    const ScalarField back = from_csv(g, text);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(back.values()[k] == f.values()[k]);
    CHECK_THROWS_AS(from_csv(g, "a,b\n"), IoError);
}
