#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hybrid/errors.hpp"
#include "hybrid/measurement.hpp"

using namespace hybrid;

namespace {

DensityOperator qubit_plus() {
    Matrix m(2, 2);
    m << 0.5, 0.5, 0.5, 0.5;
    return DensityOperator(m);
}

PhaseGrid qubit_grid() { return PhaseGrid(-16.0, 32.0, 96, -16.0, 16.0, 96); }

}  // namespace

TEST_CASE("coupling strength guard rails") {
    CHECK_THROWS_AS(MeasurementConfig(ProjectorSet::diagonal(2), 2.0, qubit_plus()), InvariantError);
    const MeasurementConfig weak(ProjectorSet::diagonal(2), 2.0, qubit_plus(), {}, 1e-2, true);
    CHECK_FALSE(weak.warnings().empty());
    const MeasurementConfig band(ProjectorSet::diagonal(2), 6.0, qubit_plus());
    CHECK_FALSE(band.warnings().empty());
    const MeasurementConfig strong(ProjectorSet::diagonal(2), 8.0, qubit_plus());
    CHECK(strong.warnings().empty());
}

TEST_CASE("kick Hamiltonian is p times the pointer observable") {
    const MeasurementConfig cfg(ProjectorSet::diagonal(3), 8.0, DensityOperator::maximally_mixed(3));
    const HybridPolynomialHamiltonian h = kick_hamiltonian(cfg);
    REQUIRE(h.terms().size() == 1);
    CHECK(h.terms()[0].exponents == Exponents{0, 1});
    const Matrix expected = Eigen::Vector3cd(8.0, 16.0, 24.0).asDiagonal().toDenseMatrix();
    CHECK((h.terms()[0].coeff.matrix() - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("damping factor") {
    CHECK(damping_factor(1, 2, 8.0) == doctest::Approx(std::exp(-8.0)).epsilon(1e-14));
    CHECK(damping_factor(1, 3, 4.0) == doctest::Approx(std::exp(-8.0)).epsilon(1e-14));
    CHECK(damping_factor(2, 2, 8.0) == 1.0);
}

TEST_CASE("closed-form kick of a qubit superposition") {
    const MeasurementConfig cfg(ProjectorSet::diagonal(2), 8.0, qubit_plus());
    const PhaseGrid g = qubit_grid();
    const HybridDensity init = measurement_initial_state(cfg, g);
    const HybridDensity out = kick_closed_form(cfg, init);
    const OutcomeReport rep = outcome_statistics(out, cfg, &init);
    REQUIRE(rep.outcomes.size() == 2);
    for (const auto& o : rep.outcomes) {
        CHECK(std::abs(o.path_mass - 0.5) < 1e-10);
        CHECK(std::abs(o.centroid - 8.0 * o.label) < 1e-3);
        CHECK(std::abs(o.width - 1.0) < 1e-3);
    }
    REQUIRE(rep.blocks.size() == 1);
    CHECK(std::abs(rep.blocks[0].ratio - std::exp(-8.0)) < 1e-10);

    // classical marginal is a sum of displaced pointers
    const ScalarField rc = classical_marginal(out);
    double err = 0.0;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) {
            const double x = g.x(i), p = g.p(j);
            double ref = 0.0;
            for (int n = 1; n <= 2; ++n) ref += 0.5 * std::exp(-((x - 8.0 * n) * (x - 8.0 * n) + p * p) / 2) / (2 * std::numbers::pi);
            err = std::max(err, std::abs(rc(i, j) - ref));
        }
    CHECK(err < 1e-12);

    // Integrating the block over p after the complex shift p -> p - i g/2 leaves
    // exp(-g^2/8) from the pointwise damping and exp(-g^2/8) from the phase.
    const Matrix qm = quantum_marginal(out).matrix();
    CHECK(std::abs(qm(0, 0) - 0.5) < 1e-10);
    CHECK(std::abs(qm(0, 1) - 0.5 * std::exp(-16.0)) < 1e-12);

    // conditional states at the pointer peaks
    for (const auto& o : projective_oracle(cfg.rho_i, cfg.ps)) {
        CHECK(std::abs(o.probability - 0.5) < 1e-15);
        CHECK(trace_distance(conditional_state(out, 8.0 * o.label, 0.0).matrix(), o.state.matrix()) < 1e-6);
    }
}

TEST_CASE("projective oracle in a rotated basis") {
    Matrix u(2, 2);
    u << 1.0, 1.0, 1.0, -1.0;
    u /= std::numbers::sqrt2;
    const auto outs = projective_oracle(qubit_plus(), ProjectorSet::from_basis(u));
    REQUIRE(outs.size() == 1);  // zero-probability outcomes carry no state
    CHECK(outs[0].label == 1);
    CHECK(std::abs(outs[0].probability - 1.0) < 1e-15);
}

TEST_CASE("closed form requires a Gaussian product initial state") {
    const MeasurementConfig cfg(ProjectorSet::diagonal(2), 8.0, qubit_plus());
    const PhaseGrid g = qubit_grid();
    const HybridDensity shifted = product_state(qubit_plus(), gaussian(g, 1.0, 0.0, 1.0));
    CHECK_THROWS_AS(kick_closed_form(cfg, shifted), NonGaussianInitial);
    CHECK_THROWS_AS(measurement_initial_state(MeasurementConfig(ProjectorSet::diagonal(2), 16.0, qubit_plus()), g),
                    DomainTooSmall);
}

TEST_CASE("numeric kick agrees with the closed form") {
    const MeasurementConfig cfg(ProjectorSet::diagonal(2), 8.0, qubit_plus());
    const PhaseGrid g(-10.0, 30.0, 96, -12.0, 12.0, 64);
    const HybridDensity init = measurement_initial_state(cfg, g);
    const HybridDensity closed = kick_closed_form(cfg, init);
    const HybridDensity numeric = kick_numeric(cfg, init);
    double linf = 0.0;
    for (std::size_t k = 0; k < closed.field().data().size(); ++k)
        linf = std::max(linf, std::abs(closed.field().data()[k] - numeric.field().data()[k]));
    CHECK(linf < 1e-4);
    const OutcomeReport rep = outcome_statistics(numeric, cfg, &init);
    CHECK(std::abs(rep.blocks[0].ratio - std::exp(-8.0)) < 1e-4);
    for (const auto& o : rep.outcomes) CHECK(std::abs(o.path_mass - 0.5) < 1e-6);
}

TEST_CASE("report JSON carries outcomes and blocks") {
    const MeasurementConfig cfg(ProjectorSet::diagonal(2), 8.0, qubit_plus());
    const HybridDensity init = measurement_initial_state(cfg, qubit_grid());
    const OutcomeReport rep = outcome_statistics(kick_closed_form(cfg, init), cfg, &init);
    const nlohmann::json j = to_json(rep);
    CHECK(j["outcomes"].size() == 2);
    CHECK(j["blocks"].size() == 1);
    CHECK(j["outcomes"][0].contains("path_mass"));
}
