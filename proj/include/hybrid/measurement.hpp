#pragma once

#include <string>
#include <vector>

#include "hybrid/hybrid_state.hpp"
#include "hybrid/liouvillian.hpp"
#include "hybrid/operator_core.hpp"

namespace hybrid {

/// Isotropic Gaussian pointer distribution; the default is the unit Gaussian at the origin.
struct PointerInit {
    double x0 = 0.0;
    double p0 = 0.0;
    double var = 1.0;
};

/// Short strong coupling H = delta(t) p g A with A = sum_n n P_n.
struct MeasurementConfig {
    MeasurementConfig(ProjectorSet ps, double g, DensityOperator rho_i, PointerInit pointer = {},
                      double epsilon = 1e-2, bool allow_weak_coupling = false);

    ProjectorSet ps;
    double g;
    DensityOperator rho_i;
    PointerInit pointer;
    double epsilon;  // width of the rectangular pulse standing in for delta(t)
    bool allow_weak_coupling;

    /// Non-fatal notes, e.g. coupling inside the 4 <= g < 8 warning band.
    std::vector<std::string> warnings() const;
};

struct NumericKickOptions {
    int steps = 0;  // 0: derived from the stability bound and min_steps
    int min_steps = 400;
    double courant = 0.5;
    /// Off-diagonal blocks keep k_p on the decaying side up to band_scale * g / dn^2.
    double band_scale = 1.0;
    double band_width = 1.0;
    double boundary_tol = 1e-7;
};

struct ProjectiveOutcome {
    int label;
    double probability;
    DensityOperator state;
};

struct OutcomeEntry {
    int label;
    double mass;       // pointer reading: marginal mass between neighbouring midpoints
    double path_mass;  // tr of the projected block, int tr[P rho] dx dp
    double centroid;
    double width;
};

struct BlockDamping {
    int label_n;
    int label_m;
    double norm_before;
    double norm_after;
    double ratio;
    double expected;  // closed-form damping factor
};

struct OutcomeReport {
    std::vector<OutcomeEntry> outcomes;
    std::vector<BlockDamping> blocks;
    double total_mass = 0.0;
    std::vector<std::string> warnings;
};

HybridPolynomialHamiltonian kick_hamiltonian(const MeasurementConfig& cfg);

/// rho_i times the pointer Gaussian; checks that the pointer's travel g * n fits the grid.
HybridDensity measurement_initial_state(const MeasurementConfig& cfg, const PhaseGrid& grid);

/// Off-diagonal damping exp(-(dn)^2 g^2 (2 var - 1) / (8 var)); for var = 1 this is exp(-(dn)^2 g^2 / 8).
double damping_factor(int label_n, int label_m, double g, double var = 1.0);

/// Block-wise closed-form solution of the kick for a Gaussian pointer.
HybridDensity kick_closed_form(const MeasurementConfig& cfg, const PhaseGrid& grid);
/// As above, after checking that `initial` is the factorized Gaussian state of cfg.
HybridDensity kick_closed_form(const MeasurementConfig& cfg, const HybridDensity& initial);

/// Integrates the compiled kick generator over the pulse, block by block.
HybridDensity kick_numeric(const MeasurementConfig& cfg, const PhaseGrid& grid, const NumericKickOptions& opts = {});
HybridDensity kick_numeric(const MeasurementConfig& cfg, const HybridDensity& initial,
                           const NumericKickOptions& opts = {});

/// L2 norm over phase space of the block P_n rho P_m.
double block_norm(const HybridDensity& h, const HermitianOperator& pn, const HermitianOperator& pm);

/// Pointer statistics per outcome cell (cells split at g (n + 1/2)). When
/// `initial` is given the off-diagonal block damping is reported as well.
OutcomeReport outcome_statistics(const HybridDensity& final_state, const MeasurementConfig& cfg,
                                 const HybridDensity* initial = nullptr);

std::vector<ProjectiveOutcome> projective_oracle(const DensityOperator& rho_i, const ProjectorSet& ps);

nlohmann::json to_json(const OutcomeReport& r);

}  // namespace hybrid
