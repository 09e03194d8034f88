#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hybrid/errors.hpp"
#include "hybrid/hybrid_state.hpp"

using namespace hybrid;

namespace {

Matrix qubit_state() {
    Matrix m(2, 2);
    m << 0.6, cplx(0.2, -0.1), cplx(0.2, 0.1), 0.4;
    return m;
}

HybridDensity sample_state() {
    const PhaseGrid g = PhaseGrid::square(10.0, 80);
    return product_state(DensityOperator(qubit_state()), gaussian(g, 2.0, 0.0, 1.0));
}

}  // namespace

TEST_CASE("marginals of a product state recover its factors") {
    const PhaseGrid g = PhaseGrid::square(10.0, 80);
    const ScalarField rc = gaussian(g, 2.0, 0.0, 1.0);
    const HybridDensity h = product_state(DensityOperator(qubit_state()), rc);
    const ScalarField back = classical_marginal(h);
    double err = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) err = std::max(err, std::abs(back.values()[k] - rc.values()[k]));
    CHECK(err < 1e-12);
    CHECK((quantum_marginal(h).matrix() - qubit_state()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(h.normalization() - 1.0) < 1e-10);
}

TEST_CASE("conditional states of a product state equal the quantum factor") {
    const HybridDensity h = sample_state();
    const DensityOperator c = conditional_state(h, 2.5, -1.0);
    CHECK((c.matrix() - qubit_state()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(c.matrix().trace().real() - 1.0) < 1e-10);
    CHECK_THROWS_AS(conditional_state(h, -9.9, 9.9), UnsupportedPoint);
    CHECK_THROWS_AS(conditional_state(h, 20.0, 0.0), UnsupportedPoint);
}

TEST_CASE("conditional state times marginal reassembles the field") {
    const HybridDensity h = sample_state();
    const ScalarField rc = classical_marginal(h);
    const PhaseGrid& g = h.grid();
    double err = 0.0;
    for (int i = 30; i < 60; i += 7)
        for (int j = 26; j < 54; j += 5)
            err = std::max(err, (conditional_state(h, g.x(i), g.p(j)).matrix() * rc(i, j) - h.at(i, j)).cwiseAbs().maxCoeff());
    CHECK(err < 1e-10);
}

TEST_CASE("expectation values against moment and trace oracles") {
    const HybridDensity h = sample_state();
    const HermitianOperator id = HermitianOperator::identity(2);
    const auto one = HybridObservable::from_polynomial(h.grid(), {{Polynomial(1.0), id}});
    CHECK(std::abs(expectation(h, one) - 1.0) < 1e-8);
    const auto x = HybridObservable::from_polynomial(h.grid(), {{Polynomial::x(), id}});
    CHECK(std::abs(expectation(h, x) - 2.0) < 1e-8);
    Matrix a(2, 2);
    a << 8.0, 0.0, 0.0, 16.0;
    const auto pointer = HybridObservable::from_polynomial(h.grid(), {{Polynomial(1.0), HermitianOperator(a)}});
    CHECK(std::abs(expectation(h, pointer) - (a * qubit_state()).trace().real()) < 1e-9);
}

TEST_CASE("scalar observable expectation equals classical quadrature") {
    const HybridDensity h = sample_state();
    const ScalarField f = ScalarField::sample(h.grid(), [](double x, double p) { return std::sin(x) * p * p; });
    const ScalarField rc = classical_marginal(h);
    double quad = 0.0;
    for (std::size_t k = 0; k < rc.values().size(); ++k) quad += f.values()[k] * rc.values()[k];
    quad *= h.grid().cell_area();
    CHECK(std::abs(expectation(h, HybridObservable::scalar(f, 2)) - quad) < 1e-12);
}

TEST_CASE("invariants are enforced on construction") {
    const PhaseGrid g = PhaseGrid::square(8.0, 32);
    MatrixField f(g, 2);
    CHECK_THROWS_AS(HybridDensity{f}, NormalizationError);
    const ScalarField rc = gaussian(g, 0.0, 0.0, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        Matrix m = Matrix::Zero(2, 2);
        m(0, 0) = rc.values()[k];
        m(0, 1) = 0.1 * rc.values()[k];
        f.set(k, m);
    }
    CHECK_THROWS_AS(HybridDensity{f}, InvariantError);
}

TEST_CASE("positivity diagnostic reports without failing") {
    const PhaseGrid g = PhaseGrid::square(8.0, 32);
    const ScalarField rc = gaussian(g, 0.0, 0.0, 1.0);
    MatrixField f(g, 2);
    for (std::size_t k = 0; k < g.size(); ++k) {
        Matrix m = Matrix::Zero(2, 2);
        m(0, 0) = 1.2 * rc.values()[k];
        m(1, 1) = -0.2 * rc.values()[k];
        f.set(k, m);
    }
    const HybridDensity h(f);
    const PositivityDiagnostic d = h.positivity();
    CHECK(d.violations > 0);
    CHECK(d.min_eigenvalue < 0.0);
    CHECK(std::abs(d.x) < 1e-12);
    CHECK(std::abs(d.p) < 1e-12);
}

TEST_CASE("snapshot round trips") {
    const HybridDensity h = sample_state();
    const auto path = std::filesystem::temp_directory_path() / "hybrid_snapshot_test.bin";
    write_snapshot(h, path);
    const HybridDensity b = read_snapshot(path);
    std::filesystem::remove(path);
    CHECK(b.grid() == h.grid());
    CHECK(b.field().data() == h.field().data());
    const HybridDensity j = hybrid_from_json(to_json(h));
    CHECK(j.field().data() == h.field().data());
}
