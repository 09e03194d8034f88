#include "hybrid/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

constexpr double kMinCoupling = 4.0;
constexpr double kWarnCoupling = 8.0;
constexpr double kReportMassFloor = 1e-9;

// P_a F P_b evaluated pointwise.
MatrixField sandwich(const MatrixField& f, const Matrix& pa, const Matrix& pb) {
    const int dim = f.dim();
    MatrixField out(f.grid(), dim);
    for (int r = 0; r < dim; ++r)
        for (int s = 0; s < dim; ++s) {
            if (pa(r, s) == cplx(0.0)) continue;
            for (int t = 0; t < dim; ++t) {
                if (f.entry_is_zero(s, t)) continue;
                const auto src = f.entry(s, t);
                for (int c = 0; c < dim; ++c) {
                    const cplx w = pa(r, s) * pb(t, c);
                    if (w == cplx(0.0)) continue;
                    auto dst = out.entry(r, c);
                    for (std::size_t q = 0; q < src.size(); ++q) dst[q] += w * src[q];
                }
            }
        }
    return out;
}

int max_label(const ProjectorSet& ps) { return *std::max_element(ps.labels().begin(), ps.labels().end()); }
int min_label(const ProjectorSet& ps) { return *std::min_element(ps.labels().begin(), ps.labels().end()); }

void check_pointer_fits(const MeasurementConfig& cfg, const PhaseGrid& grid) {
    const double reach = 6.0 * std::sqrt(cfg.pointer.var);
    const double lo = cfg.pointer.x0 + std::min(0.0, cfg.g * min_label(cfg.ps)) - reach;
    const double hi = cfg.pointer.x0 + std::max(0.0, cfg.g * max_label(cfg.ps)) + reach;
    if (lo < grid.x_min() || hi > grid.x_max() || cfg.pointer.p0 - reach < grid.p_min() ||
        cfg.pointer.p0 + reach > grid.p_max())
        throw DomainTooSmall("pointer travel g*n plus six widths does not fit the grid");
}

}  // namespace

MeasurementConfig::MeasurementConfig(ProjectorSet ps_, double g_, DensityOperator rho_i_, PointerInit pointer_,
                                     double epsilon_, bool allow_weak)
    : ps(std::move(ps_)), g(g_), rho_i(std::move(rho_i_)), pointer(pointer_), epsilon(epsilon_),
      allow_weak_coupling(allow_weak) {
    if (ps.dim() != rho_i.dim()) throw InvariantError("projector set and initial state differ in dimension");
    if (!(g >= 0.0)) throw InvariantError("coupling g must be non-negative");
    if (!allow_weak_coupling && g < kMinCoupling)
        throw InvariantError("coupling g must be at least 4 for well-separated pointer peaks");
    if (!(epsilon > 0.0)) throw InvariantError("pulse width epsilon must be positive");
    if (!(pointer.var > 0.0)) throw InvariantError("pointer variance must be positive");
}

std::vector<std::string> MeasurementConfig::warnings() const {
    std::vector<std::string> w;
    if (g < kMinCoupling) w.push_back("PeakOverlapWarning: g < 4, pointer peaks overlap");
    else if (g < kWarnCoupling) w.push_back("coupling in warning band 4 <= g < 8; collapse is only approximate");
    if (pointer.var < 0.5) w.push_back("pointer distribution narrower than a Planck cell");
    return w;
}

HybridPolynomialHamiltonian kick_hamiltonian(const MeasurementConfig& cfg) {
    HybridPolynomialHamiltonian h(cfg.ps.dim());
    if (cfg.g != 0.0) h.add(0, 1, pointer_observable(cfg.ps, cfg.g), "gA");
    return h;
}

HybridDensity measurement_initial_state(const MeasurementConfig& cfg, const PhaseGrid& grid) {
    check_pointer_fits(cfg, grid);
    return product_state(cfg.rho_i, gaussian(grid, cfg.pointer.x0, cfg.pointer.p0, cfg.pointer.var));
}

double damping_factor(int label_n, int label_m, double g, double var) {
    const double d = label_n - label_m;
    return std::exp(-d * d * g * g * (2.0 * var - 1.0) / (8.0 * var));
}

HybridDensity kick_closed_form(const MeasurementConfig& cfg, const PhaseGrid& grid) {
    check_pointer_fits(cfg, grid);
    const auto& pt = cfg.pointer;
    const int dim = cfg.ps.dim();
    const double norm = 1.0 / (2.0 * std::numbers::pi * pt.var);
    MatrixField f(grid, dim);
    for (std::size_t a = 0; a < cfg.ps.size(); ++a)
        for (std::size_t b = 0; b < cfg.ps.size(); ++b) {
            const Matrix block = cfg.ps.projector(a).matrix() * cfg.rho_i.matrix() * cfg.ps.projector(b).matrix();
            if (block.cwiseAbs().maxCoeff() < 1e-300) continue;
            const int ln = cfg.ps.label(a), lm = cfg.ps.label(b);
            const double delta = cfg.g * (ln - lm);
            const double shift = 0.5 * cfg.g * (ln + lm);
            const double damp = damping_factor(ln, lm, cfg.g, pt.var);
            for (int i = 0; i < grid.n_x(); ++i) {
                const double xs = grid.x(i) - shift - pt.x0;
                for (int j = 0; j < grid.n_p(); ++j) {
                    const double p = grid.p(j);
                    const double dp = p - pt.p0;
                    // exp(-i g dn p + i g dn (p - p0) / (2 var)) rho_C(x - g (n+m)/2, p)
                    const double phase = -delta * p + delta * dp / (2.0 * pt.var);
                    const double env = damp * norm * std::exp(-(xs * xs + dp * dp) / (2.0 * pt.var));
                    const cplx w = std::polar(env, phase);
                    const std::size_t q = grid.index(i, j);
                    for (int r = 0; r < dim; ++r)
                        for (int c = 0; c < dim; ++c)
                            if (block(r, c) != cplx(0.0)) f.entry(r, c)[q] += w * block(r, c);
                }
            }
        }
    f.hermitize();
    return HybridDensity(std::move(f));
}

HybridDensity kick_closed_form(const MeasurementConfig& cfg, const HybridDensity& initial) {
    const HybridDensity expected = measurement_initial_state(cfg, initial.grid());
    double err = 0.0;
    for (std::size_t q = 0; q < expected.field().data().size(); ++q)
        err = std::max(err, std::abs(expected.field().data()[q] - initial.field().data()[q]));
    if (initial.dim() != cfg.ps.dim() || err > 1e-10 * std::max(1.0, expected.field().max_abs()))
        throw NonGaussianInitial("closed form needs the factorized Gaussian initial state");
    return kick_closed_form(cfg, initial.grid());
}

HybridDensity kick_numeric(const MeasurementConfig& cfg, const PhaseGrid& grid, const NumericKickOptions& opts) {
    return kick_numeric(cfg, measurement_initial_state(cfg, grid), opts);
}

HybridDensity kick_numeric(const MeasurementConfig& cfg, const HybridDensity& initial,
                           const NumericKickOptions& opts) {
    if (initial.dim() != cfg.ps.dim()) throw InvariantError("initial state and projector set differ in dimension");
    const LiouvillianTermList unit = compile(kick_hamiltonian(cfg));
    if (unit.empty()) return initial;

    // delta(t) -> rectangular pulse of height 1/eps over [0, eps].
    const LiouvillianTermList pulse = unit.scaled(1.0 / cfg.epsilon);
    int steps = opts.steps;
    if (steps <= 0) {
        const LiouvillianOperator probe(unit, initial.grid());
        steps = std::max(opts.min_steps, static_cast<int>(std::ceil(1.0 / probe.max_stable_dt(opts.courant))));
    }
    const double dt = cfg.epsilon / steps;

    EvolveOptions eo;
    eo.courant = opts.courant;
    eo.boundary_tol = opts.boundary_tol;

    const int dim = cfg.ps.dim();
    MatrixField total(initial.grid(), dim);
    for (std::size_t a = 0; a < cfg.ps.size(); ++a)
        for (std::size_t b = a; b < cfg.ps.size(); ++b) {
            MatrixField block =
                sandwich(initial.field(), cfg.ps.projector(a).matrix(), cfg.ps.projector(b).matrix());
            if (block.max_abs() == 0.0) continue;
            const int dn = cfg.ps.label(a) - cfg.ps.label(b);
            // The p-derivative term multiplies Fourier mode k_p by exp(g dn k_p t / 2):
            // round-off is only kept in check by dropping the growing side.
            const double cutoff = opts.band_scale * cfg.g / (dn * dn);
            eo.band_limit.reset();
            if (dn > 0) eo.band_limit = BandLimit{Axis::P, -1e300, cutoff, opts.band_width};
            if (dn < 0) eo.band_limit = BandLimit{Axis::P, -cutoff, 1e300, opts.band_width};
            MatrixField out = evolve_field(block, pulse, cfg.epsilon, dt, eo);
            total.axpy(1.0, out);
            if (a != b) {
                for (int r = 0; r < dim; ++r)
                    for (int c = 0; c < dim; ++c) {
                        auto src = out.entry(r, c);
                        auto dst = total.entry(c, r);
                        for (std::size_t q = 0; q < src.size(); ++q) dst[q] += std::conj(src[q]);
                    }
            }
        }
    total.hermitize();
    return HybridDensity(std::move(total), kNormalizationTol + 1e-6);
}

double block_norm(const HybridDensity& h, const HermitianOperator& pn, const HermitianOperator& pm) {
    const MatrixField b = sandwich(h.field(), pn.matrix(), pm.matrix());
    double s = 0.0;
    for (const auto& v : b.data()) s += std::norm(v);
    return std::sqrt(s * h.grid().cell_area());
}

OutcomeReport outcome_statistics(const HybridDensity& final_state, const MeasurementConfig& cfg,
                                 const HybridDensity* initial) {
    OutcomeReport rep;
    rep.warnings = cfg.warnings();
    const ScalarField rho_c = classical_marginal(final_state);
    const PhaseGrid& g = rho_c.grid();

    std::vector<std::size_t> order(cfg.ps.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cfg.ps.label(a) < cfg.ps.label(b); });

    for (std::size_t idx = 0; idx < order.size(); ++idx) {
        const int label = cfg.ps.label(order[idx]);
        const double lo = idx == 0 ? -std::numeric_limits<double>::infinity()
                                   : cfg.pointer.x0 + 0.5 * cfg.g * (label + cfg.ps.label(order[idx - 1]));
        const double hi = idx + 1 == order.size()
                              ? std::numeric_limits<double>::infinity()
                              : cfg.pointer.x0 + 0.5 * cfg.g * (label + cfg.ps.label(order[idx + 1]));
        double m0 = 0.0, m1 = 0.0, m2 = 0.0;
        for (int i = 0; i < g.n_x(); ++i) {
            const double x = g.x(i);
            if (x < lo || x >= hi) continue;
            double row = 0.0;
            for (int j = 0; j < g.n_p(); ++j) row += rho_c(i, j);
            m0 += row;
            m1 += row * x;
            m2 += row * x * x;
        }
        m0 *= g.cell_area();
        m1 *= g.cell_area();
        m2 *= g.cell_area();
        rep.total_mass += m0;
        if (m0 < kReportMassFloor) continue;
        const Matrix& proj = cfg.ps.projector(order[idx]).matrix();
        double path = 0.0;
        for (std::size_t q = 0; q < final_state.field().points(); ++q)
            path += (proj * final_state.field().at(q)).trace().real();
        const double centroid = m1 / m0;
        rep.outcomes.push_back({label, m0, path * g.cell_area(), centroid, std::sqrt(std::max(0.0, m2 / m0 - centroid * centroid))});
    }

    if (initial) {
        for (std::size_t a = 0; a < cfg.ps.size(); ++a)
            for (std::size_t b = a + 1; b < cfg.ps.size(); ++b) {
                const double before = block_norm(*initial, cfg.ps.projector(a), cfg.ps.projector(b));
                if (before < 1e-12) continue;
                const double after = block_norm(final_state, cfg.ps.projector(a), cfg.ps.projector(b));
                rep.blocks.push_back({cfg.ps.label(a), cfg.ps.label(b), before, after, after / before,
                                      damping_factor(cfg.ps.label(a), cfg.ps.label(b), cfg.g, cfg.pointer.var)});
            }
    }
    return rep;
}

std::vector<ProjectiveOutcome> projective_oracle(const DensityOperator& rho_i, const ProjectorSet& ps) {
    std::vector<ProjectiveOutcome> out;
    for (std::size_t k = 0; k < ps.size(); ++k) {
        const Matrix& p = ps.projector(k).matrix();
        const double prob = (p * rho_i.matrix()).trace().real();
        if (prob <= 1e-14) continue;
        Matrix post = p * rho_i.matrix() * p / prob;
        out.push_back({ps.label(k), prob, DensityOperator((post + post.adjoint()) * 0.5)});
    }
    return out;
}

nlohmann::json to_json(const OutcomeReport& r) {
    nlohmann::json outcomes = nlohmann::json::array();
    for (const auto& o : r.outcomes)
        outcomes.push_back({{"label", o.label}, {"mass", o.mass}, {"path_mass", o.path_mass}, {"centroid", o.centroid}, {"width", o.width}});
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : r.blocks)
        blocks.push_back({{"n", b.label_n},
                          {"m", b.label_m},
                          {"norm_before", b.norm_before},
                          {"norm_after", b.norm_after},
                          {"ratio", b.ratio},
                          {"expected", b.expected}});
    return {{"outcomes", outcomes}, {"blocks", blocks}, {"total_mass", r.total_mass}, {"warnings", r.warnings}};
}

}  // namespace hybrid
