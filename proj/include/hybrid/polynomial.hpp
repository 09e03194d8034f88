#pragma once

#include <complex>
#include <map>
#include <string>
#include <utility>

namespace hybrid {

using cplx = std::complex<double>;

/// Exponent pair (a, b) of the monomial x^a p^b.
struct Exponents {
    int x = 0;
    int p = 0;

    int degree() const { return x + p; }
    friend auto operator<=>(const Exponents&, const Exponents&) = default;
};

/// Polynomial in the commuting phase-space variables (x, p) with complex
/// coefficients. Zero coefficients are never stored.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(cplx constant);  // NOLINT(google-explicit-constructor)
    Polynomial(double constant) : Polynomial(cplx(constant)) {}  // NOLINT

    static Polynomial monomial(int x_pow, int p_pow, cplx coeff = 1.0);
    static Polynomial x() { return monomial(1, 0); }
    static Polynomial p() { return monomial(0, 1); }

    const std::map<Exponents, cplx>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;
    bool is_real(double tol = 0.0) const;
    cplx coefficient(int x_pow, int p_pow) const;

    cplx operator()(double x, double p) const;
    Polynomial conj() const;

    Polynomial& operator+=(const Polynomial& rhs);
    Polynomial& operator-=(const Polynomial& rhs);
    Polynomial& operator*=(cplx s);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, cplx s) { return a *= s; }
    friend Polynomial operator*(cplx s, Polynomial a) { return a *= s; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend bool operator==(const Polynomial&, const Polynomial&) = default;

    /// Human-readable form, e.g. "(-0.5)*x^2 + (0-8i)*p".
    std::string str() const;

private:
    void add_term(Exponents e, cplx c);

    std::map<Exponents, cplx> terms_;
};

std::string format_complex(cplx c);

}  // namespace hybrid
