#include "hybrid/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace hybrid {

Polynomial::Polynomial(cplx constant) { add_term({0, 0}, constant); }

Polynomial Polynomial::monomial(int x_pow, int p_pow, cplx coeff) {
    Polynomial out;
    out.add_term({x_pow, p_pow}, coeff);
    return out;
}

void Polynomial::add_term(Exponents e, cplx c) {
    if (c == cplx(0.0)) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
        it->second += c;
        if (it->second == cplx(0.0)) terms_.erase(it);
    }
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, e.degree());
    return d;
}

bool Polynomial::is_real(double tol) const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [tol](const auto& t) { return std::abs(t.second.imag()) <= tol; });
}

cplx Polynomial::coefficient(int x_pow, int p_pow) const {
    auto it = terms_.find({x_pow, p_pow});
    return it == terms_.end() ? cplx(0.0) : it->second;
}

cplx Polynomial::operator()(double x, double p) const {
    cplx sum = 0.0;
    for (const auto& [e, c] : terms_) sum += c * std::pow(x, e.x) * std::pow(p, e.p);
    return sum;
}

Polynomial Polynomial::conj() const {
    Polynomial out;
    for (const auto& [e, c] : terms_) out.terms_.emplace(e, std::conj(c));
    return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
    for (const auto& [e, c] : rhs.terms_) add_term(e, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& rhs) {
    for (const auto& [e, c] : rhs.terms_) add_term(e, -c);
    return *this;
}

Polynomial& Polynomial::operator*=(cplx s) {
    if (s == cplx(0.0)) {
        terms_.clear();
        return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& [ea, ca] : a.terms_)
        for (const auto& [eb, cb] : b.terms_) out.add_term({ea.x + eb.x, ea.p + eb.p}, ca * cb);
    return out;
}

std::string format_complex(cplx c) {
    char buf[96];
    if (c.imag() == 0.0) {
        std::snprintf(buf, sizeof buf, "%.17g", c.real());
    } else if (c.real() == 0.0) {
        std::snprintf(buf, sizeof buf, "%.17gi", c.imag());
    } else {
        std::snprintf(buf, sizeof buf, "%.17g%+.17gi", c.real(), c.imag());
    }
    return buf;
}

std::string Polynomial::str() const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& [e, c] : terms_) {
        if (!out.empty()) out += " + ";
        out += "(" + format_complex(c) + ")";
        if (e.x > 0) out += e.x == 1 ? "*x" : "*x^" + std::to_string(e.x);
        if (e.p > 0) out += e.p == 1 ? "*p" : "*p^" + std::to_string(e.p);
    }
    return out;
}

}  // namespace hybrid
