#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybrid/cut_shift.hpp"
#include "hybrid/emit.hpp"
#include "hybrid/liouvillian.hpp"
#include "hybrid/measurement.hpp"

namespace hybrid {

enum class ScenarioKind {
    ClassicalLimit,
    QuantumLimit,
    HybridEvolve,
    MeasurementClosed,
    MeasurementNumeric,
    CutShiftRoundtrip,
    RobustnessSweep,
};

std::string to_string(ScenarioKind k);

struct HamiltonianSpec {
    int x = 0;
    int p = 0;
    double coeff = 1.0;
    Matrix op;
    std::string op_name;
};

struct GaussianSpec {
    double x0 = 0.0;
    double p0 = 0.0;
    double var = 1.0;
};

struct EvolveSpec {
    double t_final = 0.0;
    double dt = 0.01;
    EvolveOptions options;
};

struct MeasurementSpec {
    double g = 8.0;
    std::optional<Matrix> basis;  // columns; computational basis when empty
    std::vector<int> labels;
    PointerInit pointer;
    double epsilon = 1e-2;
    bool allow_weak_coupling = false;
    NumericKickOptions numeric;
};

struct ObservableSpec {
    std::string name;
    std::optional<Polynomial> poly;
    std::optional<GaussianSpec> bump;  // var holds sigma^2
};

struct DynamicsSpec {
    double t_final = 0.0;
    int samples = 8;
    double dt = 0.0025;
};

struct OutputNames {
    std::string report = "report.json";
    std::string marginal = "marginal.csv";
};

/// Parsed and type-checked scenario configuration.
struct Scenario {
    ScenarioKind kind = ScenarioKind::HybridEvolve;
    std::string name;
    int quantum_dim = 1;
    std::optional<PhaseGrid> grid;
    std::vector<HamiltonianSpec> hamiltonian;
    std::optional<DensityOperator> rho_q;
    std::optional<GaussianSpec> classical;
    std::optional<EvolveSpec> evolve;
    std::vector<std::pair<double, double>> probes;
    std::optional<MeasurementSpec> measurement;
    std::optional<ModeAssignment> mode;
    std::optional<DensityOperator> mode_state;  // on n_max * quantum_dim
    std::vector<ObservableSpec> observables;
    std::optional<DynamicsSpec> dynamics;
    QuantizeOptions quantize;
    OutputNames outputs;
};

/// Parses YAML text after applying "dotted.key=value" overrides. Throws
/// ConfigError naming the field and, where known, the line.
Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides = {},
                        const std::string& source = "<config>");
Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Builds every object the run needs and checks module preconditions without
/// integrating. Returns a summary of what was checked.
nlohmann::json validate(const Scenario& s);

HybridPolynomialHamiltonian build_hamiltonian(const Scenario& s);
/// Term list the scenario integrates (the kick generator for measurement kinds).
LiouvillianTermList scenario_terms(const Scenario& s);

struct ScenarioResult {
    nlohmann::json report;
    OutputSet files;
};

ScenarioResult run(const Scenario& s);

/// Runs and writes outputs below out_dir only when the whole run succeeded.
ScenarioResult run_to_directory(const Scenario& s, const std::filesystem::path& out_dir);

/// 0 success, 2 configuration, 3 numerical stability, 4 ill-posed input, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace hybrid
