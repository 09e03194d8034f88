#include "hybrid/cut_shift.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int rest_dimension(int total, const ModeAssignment& mode) {
    const int n = mode.trunc.n_max;
    if (total <= 0 || total % n != 0) {
        std::ostringstream msg;
        msg << "dimension " << total << " is not a multiple of the mode truncation " << n;
        throw InvariantError(msg.str());
    }
    return total / n;
}

cplx alpha_at(double x, double p) { return cplx(x, p) / std::numbers::sqrt2; }

/// <n|a> for n < n_max.
void coherent_amplitudes(cplx a, int n_max, Vector& c) {
    c.resize(n_max);
    c[0] = std::exp(-0.5 * std::norm(a));
    for (int n = 1; n < n_max; ++n) c[n] = c[n - 1] * a / std::sqrt(static_cast<double>(n));
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Rest block (i, j) of an enlarged matrix as an n_max x n_max matrix over the mode.
Matrix mode_block(const Matrix& m, int rest, int i, int j) {
    const int n = static_cast<int>(m.rows()) / rest;
    Matrix b(n, n);
    for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) b(a, c) = m(a * rest + i, c * rest + j);
    return b;
}

/// Husimi transform of an arbitrary (not necessarily positive) enlarged matrix.
MatrixField husimi_field(const Matrix& rho, int rest, int n_max, const PhaseGrid& grid) {
    MatrixField out(grid, rest);
    std::vector<Matrix> blocks;
    for (int i = 0; i < rest; ++i)
        for (int j = 0; j < rest; ++j) blocks.push_back(mode_block(rho, rest, i, j));
    Vector c;
    for (int ix = 0; ix < grid.n_x(); ++ix)
        for (int jp = 0; jp < grid.n_p(); ++jp) {
            coherent_amplitudes(alpha_at(grid.x(ix), grid.p(jp)), n_max, c);
            const std::size_t q = grid.index(ix, jp);
            for (int i = 0; i < rest; ++i)
                for (int j = 0; j < rest; ++j)
                    out.entry(i, j)[q] = c.dot(blocks[i * rest + j] * c) / kTwoPi;
        }
    return out;
}

void check_tail(const Matrix& rho, int rest, const ModeAssignment& mode) {
    const int n_max = mode.trunc.n_max;
    double tail = 0.0;
    for (int n = std::max(0, n_max - mode.guard); n < n_max; ++n)
        for (int i = 0; i < rest; ++i) tail += std::abs(rho(n * rest + i, n * rest + i));
    if (tail > mode.tail_tol) {
        std::ostringstream msg;
        msg << "population " << tail << " in the top " << mode.guard << " Fock levels exceeds " << mode.tail_tol;
        throw TruncationError(msg.str());
    }
}

/// Laguerre L_m^(k)(x) for m = 0 .. count-1.
void laguerre_row(int k, double x, int count, std::vector<double>& out) {
    out.assign(count, 0.0);
    if (count == 0) return;
    out[0] = 1.0;
    if (count > 1) out[1] = 1.0 + k - x;
    for (int m = 1; m + 1 < count; ++m)
        out[m + 1] = ((2.0 * m + 1.0 + k - x) * out[m] - (m + k) * out[m - 1]) / (m + 1.0);
}

double scalar_expectation(const HybridDensity& h, const std::function<double(double, double)>& f) {
    const PhaseGrid& g = h.grid();
    double s = 0.0;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_p(); ++j) {
            const std::size_t q = g.index(i, j);
            double tr = 0.0;
            for (int r = 0; r < h.dim(); ++r) tr += h.field().entry(r, r)[q].real();
            s += f(g.x(i), g.p(j)) * tr;
        }
    return s * g.cell_area();
}

}  // namespace

HybridDensity dequantize(const DensityOperator& rho_prime, const ModeAssignment& mode, const PhaseGrid& grid) {
    const int rest = rest_dimension(rho_prime.dim(), mode);
    check_tail(rho_prime.matrix(), rest, mode);
    MatrixField f = husimi_field(rho_prime.matrix(), rest, mode.trunc.n_max, grid);
    double peak = 0.0, edge = 0.0;
    for (int i = 0; i < rest; ++i) {
        const auto d = f.entry(i, i);
        for (const auto& v : d) peak = std::max(peak, std::abs(v));
        edge = std::max(edge, boundary_max(grid, d));
    }
    if (edge > 1e-10 * peak) {
        std::ostringstream msg;
        msg << "Husimi function reaches " << edge / peak << " of its peak at the grid boundary";
        throw DomainTooSmall(msg.str());
    }
    f.hermitize();
    return HybridDensity(std::move(f));
}

QuantizeResult quantize(const HybridDensity& h, const ModeAssignment& mode, const QuantizeOptions& opts) {
    const PhaseGrid& grid = h.grid();
    const int n_max = mode.trunc.n_max;
    // Guard-band levels are not fitted.
    const int n_fit = std::max(1, n_max - mode.guard);
    const int rest = h.dim();
    const int params = n_fit * n_fit;

    int stride = 1;
    while (static_cast<std::size_t>((grid.n_x() + stride - 1) / stride) *
               static_cast<std::size_t>((grid.n_p() + stride - 1) / stride) >
           opts.max_rows)
        ++stride;
    std::vector<std::size_t> rows;
    for (int i = 0; i < grid.n_x(); i += stride)
        for (int j = 0; j < grid.n_p(); j += stride) rows.push_back(grid.index(i, j));
    if (rows.size() < static_cast<std::size_t>(params))
        throw DomainTooSmall("grid has fewer sample points than the truncated mode has parameters");

    // Real parametrization of a Hermitian n_max x n_max matrix H:
    // H_nn, then (Re H_nm, Im H_nm) for n < m.
    Eigen::MatrixXd design(rows.size(), params);
    std::vector<double> weight(rows.size());
    Vector c;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t q = rows[r];
        const int i = static_cast<int>(q / grid.n_p()), j = static_cast<int>(q % grid.n_p());
        coherent_amplitudes(alpha_at(grid.x(i), grid.p(j)), n_fit, c);
        weight[r] = 1.0 / std::max(c.squaredNorm() / kTwoPi, opts.weight_floor);
        int col = 0;
        for (int n = 0; n < n_fit; ++n) design(r, col++) = weight[r] * std::norm(c[n]) / kTwoPi;
        for (int n = 0; n < n_fit; ++n)
            for (int m = n + 1; m < n_fit; ++m) {
                const cplx z = std::conj(c[n]) * c[m];
                design(r, col++) = weight[r] * 2.0 * z.real() / kTwoPi;
                design(r, col++) = -weight[r] * 2.0 * z.imag() / kTwoPi;
            }
    }

    // Right-hand sides: Re h_ii; Re h_ij and Im h_ij for i < j.
    std::vector<std::pair<int, int>> rhs_blocks;
    for (int i = 0; i < rest; ++i)
        for (int j = i; j < rest; ++j) rhs_blocks.emplace_back(i, j);
    Eigen::MatrixXd rhs(rows.size(), 2 * rhs_blocks.size());
    for (std::size_t b = 0; b < rhs_blocks.size(); ++b) {
        const auto e = h.field().entry(rhs_blocks[b].first, rhs_blocks[b].second);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            rhs(r, 2 * b) = weight[r] * e[rows[r]].real();
            rhs(r, 2 * b + 1) = weight[r] * e[rows[r]].imag();
        }
    }
    // Extended precision: the design's condition number grows like e^(n_fit).
    using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::ColPivHouseholderQR<LongMatrix> qr(design.cast<long double>());
    const Eigen::MatrixXd sol = qr.solve(rhs.cast<long double>()).cast<double>();

    auto unpack = [&](const Eigen::VectorXd& v) {
        Matrix m = Matrix::Zero(n_max, n_max);
        int col = 0;
        for (int n = 0; n < n_fit; ++n) m(n, n) = v[col++];
        for (int n = 0; n < n_fit; ++n)
            for (int k = n + 1; k < n_fit; ++k) {
                m(n, k) = cplx(v[col], v[col + 1]);
                m(k, n) = std::conj(m(n, k));
                col += 2;
            }
        return m;
    };
    Matrix rho = Matrix::Zero(n_max * rest, n_max * rest);
    for (std::size_t b = 0; b < rhs_blocks.size(); ++b) {
        const auto [i, j] = rhs_blocks[b];
        Matrix blk = unpack(sol.col(2 * b));
        if (i != j) blk += cplx(0.0, 1.0) * unpack(sol.col(2 * b + 1));
        for (int n = 0; n < n_max; ++n)
            for (int m = 0; m < n_max; ++m) {
                rho(n * rest + i, m * rest + j) = blk(n, m);
                rho(m * rest + j, n * rest + i) = std::conj(blk(n, m));
            }
    }

    const MatrixField fit = husimi_field(rho, rest, n_max, grid);
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < fit.data().size(); ++q) {
        num += std::norm(fit.data()[q] - h.field().data()[q]);
        den += std::norm(h.field().data()[q]);
    }
    const double residual = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    if (!(residual <= opts.residual_tol)) {
        std::ostringstream msg;
        msg << "least-squares residual " << residual << " exceeds " << opts.residual_tol
            << ": input is not a Husimi function at n_max = " << n_max;
        throw IllPosedError(msg.str());
    }

    rho = 0.5 * (rho + rho.adjoint()).eval();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    Eigen::VectorXd ev = es.eigenvalues();
    const double min_ev = ev.minCoeff();
    if (min_ev < -opts.clip_tol) {
        std::ostringstream msg;
        msg << "reconstructed operator has eigenvalue " << min_ev << " below -" << opts.clip_tol;
        throw IllPosedError(msg.str());
    }
    double clipped = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k)
        if (ev[k] < 0.0) {
            clipped -= ev[k];
            ev[k] = 0.0;
        }
    const double tr = ev.sum();
    if (!(tr > 0.0)) throw IllPosedError("reconstructed operator has no positive weight");
    Matrix out = es.eigenvectors() * (ev / tr).cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    out = 0.5 * (out + out.adjoint()).eval();
    return {DensityOperator(std::move(out)), residual, min_ev, clipped};
}

HybridPolynomialHamiltonian quantize_hamiltonian(const HybridPolynomialHamiltonian& h, const ModeAssignment& mode) {
    const int n_max = mode.trunc.n_max;
    Matrix sum = Matrix::Zero(n_max * h.dim(), n_max * h.dim());
    for (const auto& t : h.terms()) {
        if (t.exponents.degree() > h.max_degree()) throw DegreeError("term exceeds the Hamiltonian degree bound");
        const HermitianOperator a = order_normal(Polynomial::monomial(t.exponents.x, t.exponents.p), mode.trunc);
        sum += kron(a.matrix(), t.coeff.matrix());
    }
    HybridPolynomialHamiltonian out(n_max * h.dim(), h.max_degree());
    out.add(0, 0, HermitianOperator(0.5 * (sum + sum.adjoint())), "H'");
    return out;
}

HermitianOperator quantize_observable(const std::vector<std::pair<Polynomial, HermitianOperator>>& terms,
                                      const ModeAssignment& mode) {
    if (terms.empty()) throw InvariantError("observable has no terms");
    const int rest = terms.front().second.dim();
    Matrix sum = Matrix::Zero(mode.trunc.n_max * rest, mode.trunc.n_max * rest);
    for (const auto& [poly, op] : terms) {
        if (op.dim() != rest) throw InvariantError("observable terms differ in dimension");
        sum += kron(order_weyl(poly, mode.trunc).matrix(), op.matrix());
    }
    return HermitianOperator(0.5 * (sum + sum.adjoint()));
}

HermitianOperator quantize_observable(const Polynomial& poly, int rest_dim, const ModeAssignment& mode) {
    return quantize_observable({{poly, HermitianOperator::identity(rest_dim)}}, mode);
}

HermitianOperator antinormal_observable(const Polynomial& poly, int rest_dim, const ModeAssignment& mode) {
    const Matrix m = kron(order_antinormal(poly, mode.trunc).matrix(), Matrix::Identity(rest_dim, rest_dim));
    return HermitianOperator(0.5 * (m + m.adjoint()));
}

MatrixField wigner(const Matrix& rho_prime, int rest_dim, const ModeAssignment& mode, const PhaseGrid& grid) {
    const int n_max = mode.trunc.n_max;
    if (rho_prime.rows() != n_max * rest_dim || rho_prime.cols() != rho_prime.rows())
        throw InvariantError("matrix does not match the enlarged dimension");
    std::vector<Matrix> blocks;
    for (int i = 0; i < rest_dim; ++i)
        for (int j = 0; j < rest_dim; ++j) blocks.push_back(mode_block(rho_prime, rest_dim, i, j));

    // sqrt(m!/n!) for m <= n.
    Eigen::MatrixXd fact_ratio = Eigen::MatrixXd::Zero(n_max, n_max);
    for (int m = 0; m < n_max; ++m) {
        fact_ratio(m, m) = 1.0;
        for (int n = m + 1; n < n_max; ++n) fact_ratio(m, n) = fact_ratio(m, n - 1) / std::sqrt(static_cast<double>(n));
    }

    MatrixField out(grid, rest_dim);
    std::vector<double> lag;
    // T(m, n), m <= n: Wigner function of |m><n| without the Gaussian prefactor.
    Matrix t(n_max, n_max);
    for (int ix = 0; ix < grid.n_x(); ++ix)
        for (int jp = 0; jp < grid.n_p(); ++jp) {
            const cplx a = alpha_at(grid.x(ix), grid.p(jp));
            const double r2 = 4.0 * std::norm(a);
            const double pref = std::exp(-2.0 * std::norm(a)) / std::numbers::pi;
            for (int k = 0; k < n_max; ++k) {
                laguerre_row(k, r2, n_max - k, lag);
                const cplx pw = std::pow(2.0 * a, k);
                for (int m = 0; m + k < n_max; ++m) {
                    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
                    t(m, m + k) = sign * pw * fact_ratio(m, m + k) * lag[m];
                }
            }
            const std::size_t q = grid.index(ix, jp);
            for (int i = 0; i < rest_dim; ++i)
                for (int j = 0; j < rest_dim; ++j) {
                    const Matrix& b = blocks[i * rest_dim + j];
                    cplx s = 0.0;
                    for (int m = 0; m < n_max; ++m) {
                        s += b(m, m) * t(m, m);
                        for (int n = m + 1; n < n_max; ++n) s += b(m, n) * t(m, n) + b(n, m) * std::conj(t(m, n));
                    }
                    out.entry(i, j)[q] = pref * s;
                }
        }
    return out;
}

ShiftObservable ShiftObservable::polynomial(std::string name, Polynomial p) {
    if (!p.is_real()) throw InvariantError("observable polynomial must be real");
    ShiftObservable o;
    o.name = std::move(name);
    o.fn = [p](double x, double q) { return p(x, q).real(); };
    o.poly = std::move(p);
    return o;
}

ShiftObservable ShiftObservable::function(std::string name, std::function<double(double, double)> f) {
    ShiftObservable o;
    o.name = std::move(name);
    o.fn = std::move(f);
    return o;
}

ShiftObservable ShiftObservable::gaussian_bump(double sigma, double x0, double p0) {
    if (!(sigma > 0.0)) throw InvariantError("bump width must be positive");
    std::ostringstream name;
    name << "gaussian_bump(sigma=" << sigma << ")";
    return function(name.str(), [=](double x, double p) {
        return std::exp(-((x - x0) * (x - x0) + (p - p0) * (p - p0)) / (2.0 * sigma * sigma));
    });
}

ShiftReport robustness_check(const HybridDensity& h, const std::vector<ShiftObservable>& observables,
                             const ModeAssignment& mode, const QuantizeOptions& opts) {
    ShiftReport rep;
    const QuantizeResult q = quantize(h, mode, opts);
    rep.residual = q.residual;
    rep.min_eigenvalue = q.min_eigenvalue;
    rep.clipped_weight = q.clipped_weight;
    rep.husimi_min = h.positivity().min_eigenvalue;

    const HybridDensity husimi = dequantize(q.state, mode, h.grid());
    const QuantizeResult again = quantize(husimi, mode, opts);
    rep.roundtrip_trace_distance = trace_distance(q.state.matrix(), again.state.matrix());

    const ScalarField marg = classical_marginal(h);
    const auto mx = [](double x, double) { return x; };
    const auto mp = [](double, double p) { return p; };
    const double norm = integrate(marg);
    auto moment = [&](auto f) {
        double s = 0.0;
        const PhaseGrid& g = marg.grid();
        for (int i = 0; i < g.n_x(); ++i)
            for (int j = 0; j < g.n_p(); ++j) s += f(g.x(i), g.p(j)) * marg(i, j);
        return s * g.cell_area() / norm;
    };
    const double ex = moment(mx), ep = moment(mp);
    const double vx = moment([&](double x, double) { return (x - ex) * (x - ex); });
    const double vp = moment([&](double, double p) { return (p - ep) * (p - ep); });
    rep.min_conditional_variance = std::min(vx, vp);

    const int rest = h.dim();
    std::optional<MatrixField> w;
    for (const auto& obs : observables) {
        ObservableShift s;
        s.name = obs.name;
        s.hybrid = scalar_expectation(h, obs.fn);
        if (obs.poly) {
            const HermitianOperator weyl = quantize_observable(*obs.poly, rest, mode);
            s.quantum = (q.state.matrix() * weyl.matrix()).trace().real();
            const HermitianOperator anti = antinormal_observable(*obs.poly, rest, mode);
            const double husimi_avg = scalar_expectation(husimi, obs.fn);
            s.antinormal_gap = std::abs(husimi_avg - (q.state.matrix() * anti.matrix()).trace().real());
        } else {
            if (!w) w = wigner(q.state.matrix(), rest, mode, h.grid());
            const PhaseGrid& g = h.grid();
            double acc = 0.0;
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_p(); ++j) {
                    const std::size_t k = g.index(i, j);
                    double tr = 0.0;
                    for (int r = 0; r < rest; ++r) tr += w->entry(r, r)[k].real();
                    acc += obs.fn(g.x(i), g.p(j)) * tr;
                }
            s.quantum = acc * g.cell_area();
        }
        s.delta = std::abs(s.hybrid - s.quantum);
        rep.observables.push_back(std::move(s));
    }
    return rep;
}

nlohmann::json to_json(const ShiftReport& r) {
    nlohmann::json j;
    j["roundtrip_trace_distance"] = r.roundtrip_trace_distance;
    j["residual"] = r.residual;
    j["min_eigenvalue"] = r.min_eigenvalue;
    j["clipped_weight"] = r.clipped_weight;
    j["husimi_min"] = r.husimi_min;
    j["min_conditional_variance"] = r.min_conditional_variance;
    j["observables"] = nlohmann::json::array();
    for (const auto& o : r.observables) {
        nlohmann::json e{{"name", o.name}, {"hybrid", o.hybrid}, {"quantum", o.quantum}, {"delta", o.delta}};
        e["antinormal_gap"] = o.antinormal_gap ? nlohmann::json(*o.antinormal_gap) : nlohmann::json();
        j["observables"].push_back(std::move(e));
    }
    return j;
}

ShiftDynamicsResult shift_dynamics_check(const DensityOperator& rho_prime, const ModeAssignment& mode,
                                         const PhaseGrid& grid, double t_final, int samples, double dt) {
    const int n_max = mode.trunc.n_max;
    if (rho_prime.dim() != n_max) throw InvariantError("dynamics check needs a state of the mode alone");
    if (samples < 1) throw InvariantError("need at least one sample time");

    HybridPolynomialHamiltonian hc(1);
    hc.add_scalar(Polynomial::monomial(2, 0, 0.5) + Polynomial::monomial(0, 2, 0.5));
    const LiouvillianTermList terms = compile(hc);

    ShiftDynamicsResult res;
    HybridDensity classical = dequantize(rho_prime, mode, grid);
    double t_prev = 0.0;
    for (int s = 1; s <= samples; ++s) {
        const double t = t_final * s / samples;
        EvolveDiagnostics d;
        classical = evolve(classical, terms, t - t_prev, dt, {}, &d);
        t_prev = t;
        res.evolve.steps += d.steps;
        res.evolve.dt = d.dt;
        res.evolve.max_drift = std::max(res.evolve.max_drift, d.max_drift);
        res.evolve.drift_per_time = std::max(res.evolve.drift_per_time, d.drift_per_time);
        res.evolve.max_hermiticity_defect = std::max(res.evolve.max_hermiticity_defect, d.max_hermiticity_defect);

        Matrix rotated = rho_prime.matrix();
        for (int n = 0; n < n_max; ++n)
            for (int m = 0; m < n_max; ++m) rotated(n, m) *= std::polar(1.0, -(n - m) * t);
        const HybridDensity quantum = dequantize(DensityOperator(rotated), mode, grid);

        double err = 0.0;
        for (std::size_t q = 0; q < quantum.field().data().size(); ++q)
            err = std::max(err, std::abs(quantum.field().data()[q] - classical.field().data()[q]));
        res.times.push_back(t);
        res.linf.push_back(err);
        res.max_linf = std::max(res.max_linf, err);
    }
    return res;
}

}  // namespace hybrid
