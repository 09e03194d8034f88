#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <numbers>

#include "hybrid/errors.hpp"
#include "hybrid/liouvillian.hpp"

using namespace hybrid;

namespace {

using Key = std::array<int, 4>;  // powers of x, p, d_x, d_p

double binom(int n, int k) { return std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0)); }

// (x + (dx + i dp)/2)^a (p + (dp - i dx)/2)^b by the binomial theorem.
std::map<Key, cplx> substituted(int a, int b) {
    std::map<Key, cplx> out;
    const cplx i(0, 1);
    for (int ka = 0; ka <= a; ++ka)          // power of the shift in the x factor
        for (int ja = 0; ja <= ka; ++ja)     // of which d_x
            for (int kb = 0; kb <= b; ++kb)  // power of the shift in the p factor
                for (int jb = 0; jb <= kb; ++jb) {  // of which d_p
                    const cplx c = binom(a, ka) * binom(ka, ja) * std::pow(0.5, ka) * std::pow(i, ka - ja) *
                                   binom(b, kb) * binom(kb, jb) * std::pow(0.5, kb) * std::pow(-i, kb - jb);
                    out[{a - ka, b - kb, ja + (kb - jb), (ka - ja) + jb}] += c;
                }
    return out;
}

// Net scalar generator: sum of left and right coefficients per derivative index.
std::map<std::pair<int, int>, Polynomial> scalar_generator(const LiouvillianTermList& tl) {
    std::map<std::pair<int, int>, Polynomial> out;
    for (const auto& t : tl.terms()) out[{t.dx, t.dp}] += t.coeff * t.op(0, 0);
    return out;
}

bool poly_close(const Polynomial& a, const Polynomial& b, double tol) {
    const Polynomial d = a - b;
    for (const auto& [e, c] : d.terms())
        if (std::abs(c) > tol) return false;
    return true;
}

LiouvillianTermList scalar_terms(int a, int b, double c = 1.0) {
    HybridPolynomialHamiltonian h(1);
    h.add(a, b, HermitianOperator::identity(1) * c);
    return compile(h);
}

double gauss(double x, double p, double x0, double p0) {
    return std::exp(-((x - x0) * (x - x0) + (p - p0) * (p - p0)) / 2.0) / (2 * std::numbers::pi);
}

}  // namespace

TEST_CASE("H = p transports along x") {
    const auto gen = scalar_generator(scalar_terms(0, 1));
    for (const auto& [d, poly] : gen) {
        if (d == std::pair{1, 0})
            CHECK(poly_close(poly, Polynomial(-1.0), 1e-15));
        else
            CHECK(poly_close(poly, Polynomial(), 1e-15));
    }
}

TEST_CASE("harmonic H compiles to the Poisson bracket") {
    HybridPolynomialHamiltonian h(1);
    h.add(2, 0, HermitianOperator::identity(1) * 0.5).add(0, 2, HermitianOperator::identity(1) * 0.5);
    const auto gen = scalar_generator(compile(h));
    for (const auto& [d, poly] : gen) {
        if (d == std::pair{0, 1})
            CHECK(poly_close(poly, Polynomial::x(), 1e-15));
        else if (d == std::pair{1, 0})
            CHECK(poly_close(poly, Polynomial::p() * cplx(-1.0), 1e-15));
        else
            CHECK(poly_close(poly, Polynomial(), 1e-15));
    }
}

TEST_CASE("scalar monomials up to degree four: full expansion and first-order Poisson part") {
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; a + b <= 4; ++b) {
            CAPTURE(a);
            CAPTURE(b);
            std::map<std::pair<int, int>, Polynomial> oracle;
            for (const auto& [k, c] : substituted(a, b)) {
                // -i S rho + h.c.: coefficient plus its conjugate
                const cplx v = cplx(0, -1) * c;
                oracle[{k[2], k[3]}] += Polynomial::monomial(k[0], k[1], v + std::conj(v));
            }
            auto gen = scalar_generator(scalar_terms(a, b));
            for (auto& [d, poly] : oracle) CHECK(poly_close(gen[d], poly, 1e-13));
            for (auto& [d, poly] : gen) CHECK(poly_close(poly, oracle[d], 1e-13));
            // {H, rho} = dH/dx d_p rho - dH/dp d_x rho
            const Polynomial dhdx = a ? Polynomial::monomial(a - 1, b, a) : Polynomial();
            const Polynomial dhdp = b ? Polynomial::monomial(a, b - 1, b) : Polynomial();
            CHECK(poly_close(gen[{0, 1}], dhdx, 1e-13));
            CHECK(poly_close(gen[{1, 0}], dhdp * cplx(-1.0), 1e-13));
            if (a + b <= 1)
                for (auto& [d, poly] : gen)
                    if (d.first + d.second > 1) CHECK(poly_close(poly, Polynomial(), 1e-15));
        }
}

TEST_CASE("constant operator Hamiltonian compiles to the commutator") {
    Matrix hq(2, 2);
    hq << 0.3, cplx(0.7, -0.2), cplx(0.7, 0.2), -0.3;
    HybridPolynomialHamiltonian h(2);
    h.add(0, 0, HermitianOperator(hq), "Hq");
    const LiouvillianTermList tl = compile(h);
    CHECK_FALSE(tl.has_derivatives());
    const PhaseGrid g = PhaseGrid::square(8.0, 32);
    Matrix rq(2, 2);
    rq << 0.8, cplx(0.1, 0.3), cplx(0.1, -0.3), 0.2;
    const HybridDensity rho = product_state(DensityOperator(rq), gaussian(g, 0.0, 0.0, 1.0));
    const MatrixField rate = apply(tl, rho);
    double err = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Matrix r = rho.field().at(k);
        err = std::max(err, (rate.at(k) - cplx(0, -1) * (hq * r - r * hq)).cwiseAbs().maxCoeff());
    }
    CHECK(err < 1e-15);
}

TEST_CASE("transport rate against the analytic derivative") {
    const PhaseGrid g = PhaseGrid::square(10.0, 64);
    const HybridDensity rho = product_state(DensityOperator::maximally_mixed(1), gaussian(g, 1.0, 0.5, 1.0));
    const MatrixField rate = apply(scalar_terms(0, 1), rho);
    double err = 0.0;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) {
            const double x = g.x(i), p = g.p(j);
            err = std::max(err, std::abs(rate.at(g.index(i, j))(0, 0) - (x - 1.0) * gauss(x, p, 1.0, 0.5)));
        }
    CHECK(err < 1e-10);
}

TEST_CASE("rotationally symmetric Gaussian is stationary under the harmonic flow") {
    const PhaseGrid g = PhaseGrid::square(10.0, 64);
    HybridPolynomialHamiltonian h(1);
    h.add_scalar(Polynomial::monomial(2, 0, 0.5) + Polynomial::monomial(0, 2, 0.5));
    const HybridDensity rho = product_state(DensityOperator::maximally_mixed(1), gaussian(g, 0.0, 0.0, 1.0));
    CHECK(apply(compile(h), rho).max_abs() < 1e-8);
}

TEST_CASE("hybrid coupling keeps the rate pointwise Hermitian") {
    Matrix sz(2, 2), sx(2, 2);
    sz << 1.0, 0.0, 0.0, -1.0;
    sx << 0.0, 1.0, 1.0, 0.0;
    HybridPolynomialHamiltonian h(2);
    h.add(1, 0, HermitianOperator(sz) * 0.3, "sz").add(0, 2, HermitianOperator(sx) * 0.2, "sx").add(1, 1,
                                                                                                     HermitianOperator(sz + sx), "m");
    const LiouvillianTermList tl = compile(h);
    CHECK(tl.is_conjugation_closed(1e-15));
    const PhaseGrid g = PhaseGrid::square(10.0, 64);
    Matrix rq(2, 2);
    rq << 0.5, 0.5, 0.5, 0.5;
    const HybridDensity rho = product_state(DensityOperator(rq), gaussian(g, 0.5, 0.0, 1.0));
    CHECK(apply(tl, rho).hermiticity_defect() < 1e-12);
}

TEST_CASE("degree bound and empty Hamiltonian") {
    HybridPolynomialHamiltonian h(1);
    CHECK_THROWS_AS(h.add(3, 2, HermitianOperator::identity(1)), DegreeError);
    CHECK(compile(HybridPolynomialHamiltonian(2)).empty());
    const PhaseGrid g = PhaseGrid::square(8.0, 32);
    const HybridDensity rho = product_state(DensityOperator::maximally_mixed(2), gaussian(g, 0.0, 0.0, 1.0));
    CHECK(apply(compile(HybridPolynomialHamiltonian(2)), rho).max_abs() == 0.0);
}

TEST_CASE("evolution to t = 0 returns the input and RK4 converges at fourth order") {
    Matrix hq(2, 2);
    hq << 1.0, 0.5, 0.5, -1.0;
    HybridPolynomialHamiltonian h(2);
    h.add(0, 0, HermitianOperator(hq));
    const LiouvillianTermList tl = compile(h);
    const PhaseGrid g = PhaseGrid::square(8.0, 32);
    Matrix rq = Matrix::Zero(2, 2);
    rq(0, 0) = 1.0;
    const HybridDensity rho = product_state(DensityOperator(rq), gaussian(g, 0.0, 0.0, 1.0));
    CHECK(evolve(rho, tl, 0.0, 0.1).field().data() == rho.field().data());

    // exp(-i t n.sigma |h|) with |h| = sqrt(1.25)
    const double w = std::sqrt(1.25), t = 2.0;
    const Matrix u = std::cos(w * t) * Matrix::Identity(2, 2) - cplx(0, 1) * std::sin(w * t) / w * hq;
    const Matrix exact = u * rq * u.adjoint();
    auto err = [&](double dt) {
        const HybridDensity out = evolve(rho, tl, t, dt);
        return (conditional_state(out, 0.0, 0.0).matrix() - exact).cwiseAbs().maxCoeff();
    };
    const double e1 = err(0.1), e2 = err(0.05);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("time steps above the stability bound are refused") {
    HybridPolynomialHamiltonian h(1);
    h.add_scalar(Polynomial::monomial(2, 0, 0.5) + Polynomial::monomial(0, 2, 0.5));
    const PhaseGrid g = PhaseGrid::square(10.0, 64);
    const HybridDensity rho = product_state(DensityOperator::maximally_mixed(1), gaussian(g, 2.0, 0.0, 1.0));
    const LiouvillianTermList tl = compile(h);
    const LiouvillianOperator op(tl, g);
    CHECK(op.max_stable_dt(0.5) > 0.0);
    CHECK_THROWS_AS(evolve(rho, tl, 1.0, 4.0 * op.max_stable_dt(0.5)), StabilityError);
}
