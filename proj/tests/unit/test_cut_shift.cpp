#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hybrid/cut_shift.hpp"
#include "hybrid/errors.hpp"

using namespace hybrid;

namespace {

constexpr double kPi = std::numbers::pi;

Matrix fock_pure(int n_max, std::initializer_list<std::pair<int, cplx>> amps) {
    Vector v = Vector::Zero(n_max);
    for (const auto& [n, a] : amps) v[n] = a;
    v.normalize();
    return v * v.adjoint();
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

const PhaseGrid kGrid = PhaseGrid::square(12.0, 96);

}  // namespace

TEST_CASE("Husimi function of coherent states is a unit Gaussian") {
    const ModeAssignment mode(FockTruncation(24));
    const Vector v = coherent_state(1.0, -0.5, FockTruncation(24));
    const HybridDensity h = dequantize(DensityOperator(Matrix(v * v.adjoint())), mode, kGrid);
    double err = 0.0;
    for (int i = 0; i < kGrid.n_x(); ++i)
        for (int j = 0; j < kGrid.n_p(); ++j) {
            const double x = kGrid.x(i), p = kGrid.p(j);
            const double ref = std::exp(-((x - 1.0) * (x - 1.0) + (p + 0.5) * (p + 0.5)) / 2.0) / (2 * kPi);
            err = std::max(err, std::abs(h.at(i, j)(0, 0) - ref));
        }
    CHECK(err < 1e-12);
    CHECK(std::abs(h.normalization() - 1.0) < 1e-10);
}

TEST_CASE("Husimi function of a Fock state") {
    const ModeAssignment mode(FockTruncation(24));
    const HybridDensity h = dequantize(DensityOperator(fock_pure(24, {{3, 1.0}})), mode, kGrid);
    double err = 0.0;
    for (int i = 0; i < kGrid.n_x(); i += 3)
        for (int j = 0; j < kGrid.n_p(); j += 3) {
            const double s = 0.5 * (kGrid.x(i) * kGrid.x(i) + kGrid.p(j) * kGrid.p(j));
            err = std::max(err, std::abs(h.at(i, j)(0, 0) - std::exp(-s) * s * s * s / 6.0 / (2 * kPi)));
        }
    CHECK(err < 1e-14);
}

TEST_CASE("dequantize guards against truncation and small domains") {
    const ModeAssignment mode(FockTruncation(24));
    CHECK_THROWS_AS(dequantize(DensityOperator(fock_pure(24, {{22, 1.0}})), mode, kGrid), TruncationError);
    CHECK_THROWS_AS(dequantize(DensityOperator(fock_pure(24, {{19, 1.0}})), mode, PhaseGrid::square(5.0, 32)),
                    DomainTooSmall);
    CHECK_THROWS_AS(dequantize(DensityOperator::maximally_mixed(25), mode, kGrid), InvariantError);
}

TEST_CASE("round trip of a Fock-supported mode state") {
    const ModeAssignment mode(FockTruncation(24));
    const Matrix rho = 0.7 * fock_pure(24, {{0, 1.0}, {2, cplx(0, 0.5)}, {5, 0.3}}) + 0.3 * fock_pure(24, {{19, 1.0}});
    const QuantizeResult q = quantize(dequantize(DensityOperator(rho), mode, kGrid), mode);
    CHECK(trace_distance(q.state.matrix(), rho) < 1e-6);
    CHECK(q.residual < 1e-10);
}

TEST_CASE("round trip with an entangled qubit") {
    const ModeAssignment mode(FockTruncation(24));
    Vector psi = Vector::Zero(48);
    psi[0 * 2 + 0] = 1.0;  // |0>|up>
    psi[4 * 2 + 1] = cplx(0.0, 1.0);  // |4>|down>
    psi.normalize();
    const Matrix rho = psi * psi.adjoint();
    const HybridDensity h = dequantize(DensityOperator(rho), mode, kGrid);
    CHECK(h.dim() == 2);
    const QuantizeResult q = quantize(h, mode);
    CHECK(trace_distance(q.state.matrix(), rho) < 1e-6);
}

TEST_CASE("fields that are no Husimi function are rejected") {
    const ModeAssignment mode(FockTruncation(24));
    // far narrower than the minimum-uncertainty Gaussian
    const PhaseGrid fine = PhaseGrid::square(8.0, 128);
    const HybridDensity narrow = product_state(DensityOperator::maximally_mixed(1), gaussian(fine, 0.0, 0.0, 0.1));
    CHECK_THROWS_AS(quantize(narrow, mode), IllPosedError);
}

TEST_CASE("Wigner functions of vacuum and the first excited state") {
    const ModeAssignment mode(FockTruncation(24));
    const MatrixField w0 = wigner(fock_pure(24, {{0, 1.0}}), 1, mode, kGrid);
    const MatrixField w1 = wigner(fock_pure(24, {{1, 1.0}}), 1, mode, kGrid);
    double e0 = 0.0, e1 = 0.0;
    for (int i = 0; i < kGrid.n_x(); i += 2)
        for (int j = 0; j < kGrid.n_p(); j += 2) {
            const double r2 = kGrid.x(i) * kGrid.x(i) + kGrid.p(j) * kGrid.p(j);
            const std::size_t q = kGrid.index(i, j);
            e0 = std::max(e0, std::abs(w0.entry(0, 0)[q] - std::exp(-r2) / kPi));
            e1 = std::max(e1, std::abs(w1.entry(0, 0)[q] - (2 * r2 - 1) * std::exp(-r2) / kPi));
        }
    CHECK(e0 < 1e-14);
    CHECK(e1 < 1e-14);
}

TEST_CASE("Wigner function of a coherence reproduces Weyl expectations") {
    const ModeAssignment mode(FockTruncation(24));
    const Matrix rho = fock_pure(24, {{0, 1.0}, {1, cplx(0.6, 0.8)}});
    const MatrixField w = wigner(rho, 1, mode, kGrid);
    double mean_x = 0.0, mean_p = 0.0;
    for (int i = 0; i < kGrid.n_x(); ++i)
        for (int j = 0; j < kGrid.n_p(); ++j) {
            const double v = w.entry(0, 0)[kGrid.index(i, j)].real();
            mean_x += v * kGrid.x(i);
            mean_p += v * kGrid.p(j);
        }
    mean_x *= kGrid.cell_area();
    mean_p *= kGrid.cell_area();
    const Matrix x = position(24), p = momentum(24);
    CHECK(std::abs(mean_x - (rho * x).trace().real()) < 1e-12);
    CHECK(std::abs(mean_p - (rho * p).trace().real()) < 1e-12);
}

TEST_CASE("anti-normal identity against quadrature of the Husimi function") {
    const ModeAssignment mode(FockTruncation(24));
    const Matrix rho = fock_pure(24, {{1, 1.0}, {3, 0.5}, {4, cplx(0.0, -0.4)}});
    const HybridDensity h = dequantize(DensityOperator(rho), mode, kGrid);
    const Polynomial f = Polynomial::monomial(2, 1, 0.3) + Polynomial::monomial(0, 2) + Polynomial::monomial(1, 0, -1.0);
    double quad = 0.0;
    for (int i = 0; i < kGrid.n_x(); ++i)
        for (int j = 0; j < kGrid.n_p(); ++j) quad += f(kGrid.x(i), kGrid.p(j)).real() * h.at(i, j)(0, 0).real();
    quad *= kGrid.cell_area();
    const double an = (rho * antinormal_observable(f, 1, mode).matrix()).trace().real();
    CHECK(std::abs(quad - an) < 1e-10);
}

TEST_CASE("quantized operators") {
    const ModeAssignment mode(FockTruncation(12));
    const HermitianOperator xq = quantize_observable(Polynomial::x(), 2, mode);
    CHECK((xq.matrix() - kron(position(12), Matrix::Identity(2, 2))).cwiseAbs().maxCoeff() < 1e-14);
    HybridPolynomialHamiltonian h(1);
    h.add_scalar(Polynomial::monomial(2, 0, 0.5) + Polynomial::monomial(0, 2, 0.5));
    const HybridPolynomialHamiltonian hq = quantize_hamiltonian(h, mode);
    REQUIRE(hq.terms().size() == 1);
    CHECK(hq.terms()[0].exponents.degree() == 0);
    Matrix number = Matrix::Zero(12, 12);
    for (int n = 0; n < 12; ++n) number(n, n) = n;
    CHECK((hq.terms()[0].coeff.matrix() - number).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("robustness report on the vacuum") {
    const ModeAssignment mode(FockTruncation(24));
    const HybridDensity h = dequantize(DensityOperator(fock_pure(24, {{0, 1.0}})), mode, kGrid);
    const ShiftReport r = robustness_check(
        h,
        {ShiftObservable::polynomial("x", Polynomial::x()), ShiftObservable::polynomial("x2", Polynomial::monomial(2, 0)),
         ShiftObservable::gaussian_bump(2.0)},
        mode);
    REQUIRE(r.observables.size() == 3);
    CHECK(r.observables[0].delta < 1e-9);
    CHECK(std::abs(r.observables[1].delta - 0.5) < 1e-8);
    // vacuum: Husimi variance 1, Wigner variance 1/2
    const double s2 = 4.0;
    CHECK(std::abs(r.observables[2].hybrid - s2 / (s2 + 1)) < 1e-8);
    CHECK(std::abs(r.observables[2].quantum - 2 * s2 / (2 * s2 + 1)) < 1e-8);
    CHECK(r.roundtrip_trace_distance < 1e-6);
    CHECK(std::abs(r.min_conditional_variance - 1.0) < 1e-8);
    CHECK(to_json(r)["observables"].size() == 3);
}

TEST_CASE("harmonic dynamics commute with the shift") {
    const ModeAssignment mode(FockTruncation(24));
    const DensityOperator rho(fock_pure(24, {{0, 1.0}, {2, 0.5}, {6, cplx(0.0, 0.3)}}));
    const ShiftDynamicsResult r = shift_dynamics_check(rho, mode, PhaseGrid::square(12.0, 64), 0.5, 2, 0.005);
    CHECK(r.times.size() == 2);
    CHECK(r.max_linf < 1e-6);
}
