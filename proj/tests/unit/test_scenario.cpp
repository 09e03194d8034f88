#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hybrid/errors.hpp"
#include "hybrid/scenario.hpp"

using namespace hybrid;

namespace {

const std::string kEvolveZero = R"(kind: hybrid_evolve
name: idle
quantum_dim: 2
grid: {half_width: 10, n: 40}
hamiltonian: []
initial:
  quantum: {populations: [0.25, 0.75]}
  classical: {x0: 0.5, p0: 0, var: 1}
evolve: {t_final: 1.0, dt: 0.05}
)";

const std::string kMeasureQubit = R"(kind: measurement_closed
quantum_dim: 2
grid:
  x: {min: -16, max: 32, n: 96}
  p: {min: -16, max: 16, n: 96}
initial:
  quantum: {populations: [0.5, 0.5]}
measurement: {g: 8}
)";

std::filesystem::path fresh_dir(const std::string& name) {
    const auto d = std::filesystem::temp_directory_path() / ("hybridsim_test_" + name);
    std::filesystem::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("JSON floats print with seventeen significant digits") {
    nlohmann::json j{{"a", 0.1}, {"b", 1.0}, {"c", 3}, {"d", {1.5, 2.5}}};
    const std::string s = dump_json(j);
    CHECK(s.find("0.10000000000000001") != std::string::npos);
    CHECK(s.find("\"b\": 1.0") != std::string::npos);
    CHECK(s.find("\"c\": 3") != std::string::npos);
    CHECK(nlohmann::json::parse(s) == j);
    CHECK(dump_json(nlohmann::json::object()) == "{}\n");
    CHECK(nlohmann::json::parse(dump_json(nlohmann::json::object())).empty());
}

TEST_CASE("CSV table has a header and round-trips") {
    const std::string t = csv_table({"a", "b"}, {{0.1, 2.0}});
    CHECK(t == "a,b\n0.10000000000000001,2\n");
    CHECK_THROWS_AS(csv_table({"a"}, {{1.0, 2.0}}), InvariantError);
}

TEST_CASE("missing grid is a configuration error") {
    std::string text = kEvolveZero;
    text.erase(text.find("grid:"), text.find("hamiltonian:") - text.find("grid:"));
    try {
        parse_scenario(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("grid") != std::string::npos);
        CHECK(exit_code_for(e) == 2);
    }
}

TEST_CASE("unknown keys report field and line") {
    std::string text = kEvolveZero + "evolv: {t_final: 1}\n";
    try {
        parse_scenario(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("evolv") != std::string::npos);
        CHECK(msg.find("line 10") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_scenario(kEvolveZero, {"initial.quantum.populations=[0.5, 0.6]"}), ConfigError);
    CHECK_THROWS_AS(parse_scenario(kEvolveZero, {"kind=sideways"}), ConfigError);
    CHECK_THROWS_AS(parse_scenario(kEvolveZero, {"nokey"}), ConfigError);
}

TEST_CASE("overrides replace nested values") {
    const Scenario s = parse_scenario(kEvolveZero, {"evolve.dt=0.025", "grid.n=64", "initial.classical.x0=-1"});
    CHECK(s.evolve->dt == 0.025);
    CHECK(s.grid->n_x() == 64);
    CHECK(s.classical->x0 == -1.0);
    const Scenario m = parse_scenario(kMeasureQubit, {"measurement.g=10"});
    CHECK(m.measurement->g == 10.0);
}

TEST_CASE("operator presets and inline matrices") {
    const std::string text = R"(kind: quantum_limit
quantum_dim: 2
grid: {half_width: 8, n: 32}
hamiltonian:
  - {coeff: 0.5, op: sigma_y}
  - {op: [[1, [0, 1]], [[0, -1], 2]]}
initial:
  quantum: {pure: [1, [0, 1]]}
  classical: {}
evolve: {t_final: 0.1, dt: 0.01}
)";
    const Scenario s = parse_scenario(text);
    REQUIRE(s.hamiltonian.size() == 2);
    CHECK(s.hamiltonian[0].op(0, 1) == cplx(0, -1));
    CHECK(s.hamiltonian[1].op(0, 1) == cplx(0, 1));
    CHECK(std::abs(s.rho_q->matrix().trace().real() - 1.0) < 1e-15);
    std::string bad = text;
    bad.replace(bad.find("[[0, -1], 2]"), 12, "[[0, 1], 2]");
    CHECK_THROWS_AS(parse_scenario(bad), ConfigError);
}

TEST_CASE("zero Hamiltonian leaves the state unchanged") {
    const Scenario s = parse_scenario(kEvolveZero);
    const ScenarioResult r = run(s);
    const auto& q = r.report["quantum_marginal"];
    const Matrix qm = matrix_from_json(q);
    CHECK(std::abs(qm(0, 0).real() - 0.25) < 1e-12);
    CHECK(std::abs(qm(1, 1).real() - 0.75) < 1e-12);
    CHECK(r.report["conservation"]["drift_per_time"].get<double>() == 0.0);
    std::string marginal;
    for (const auto& [name, text] : r.files.files())
        if (name == "marginal.csv") marginal = text;
    CHECK(marginal == to_csv(gaussian(*s.grid, 0.5, 0.0, 1.0)));
}

TEST_CASE("measurement scenario reports projective masses") {
    const ScenarioResult r = run(parse_scenario(kMeasureQubit));
    const auto& outcomes = r.report["outcome_report"]["outcomes"];
    REQUIRE(outcomes.size() == 2);
    for (const auto& o : outcomes) CHECK(std::abs(o["path_mass"].get<double>() - 0.5) < 1e-6);
    CHECK(r.report["summary"]["max_collapse_trace_distance"].get<double>() < 1e-4);
}

TEST_CASE("runs are byte-for-byte deterministic") {
    const Scenario s = parse_scenario(kMeasureQubit);
    const auto a = run(s).files.files();
    const auto b = run(s).files.files();
    CHECK(a == b);
}

TEST_CASE("outputs are written only after a successful run") {
    const auto dir = fresh_dir("ok");
    run_to_directory(parse_scenario(kMeasureQubit), dir);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "marginal.csv"));
    std::filesystem::remove_all(dir);

    const auto bad = fresh_dir("unstable");
    const Scenario s = parse_scenario(kEvolveZero, {"hamiltonian=[{x: 2, coeff: 0.5}, {p: 2, coeff: 0.5}]", "evolve.dt=0.5"});
    try {
        run_to_directory(s, bad);
        FAIL("expected StabilityError");
    } catch (const StabilityError& e) {
        CHECK(exit_code_for(e) == 3);
    }
    CHECK_FALSE(std::filesystem::exists(bad));
}

TEST_CASE("validation mirrors module preconditions") {
    CHECK_THROWS_AS(validate(parse_scenario(kMeasureQubit, {"measurement.g=16"})), ConfigError);
    CHECK_THROWS_AS(validate(parse_scenario(kEvolveZero, {"initial.classical.x0=5"})), ConfigError);
    const std::string cut = R"(kind: cut_shift_roundtrip
grid: {half_width: 5, n: 32}
mode: {n_max: 24}
state: {fock: [[19, 1]]}
)";
    CHECK_THROWS_AS(validate(parse_scenario(cut)), ConfigError);
    CHECK_THROWS_AS(parse_scenario(cut, {"state.fock=[[30, 1]]"}), ConfigError);
    CHECK(validate(parse_scenario(cut, {"grid.half_width=12", "grid.n=96"}))["checks"].size() > 0);
}

TEST_CASE("error classes map to exit codes") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(StabilityError("x")) == 3);
    CHECK(exit_code_for(IllPosedError("x")) == 4);
    CHECK(exit_code_for(IoError("x")) == 1);
}

TEST_CASE("every shipped scenario validates") {
    int count = 0;
    for (const auto& e : std::filesystem::directory_iterator(HYBRIDSIM_SCENARIO_DIR)) {
        if (e.path().extension() != ".yaml") continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(validate(load_scenario(e.path())));
        ++count;
    }
    CHECK(count >= 7);
}

TEST_CASE("structurally wrong values are configuration errors") {
    CHECK_THROWS_AS(parse_scenario(kEvolveZero, {"grid=7"}), ConfigError);
    CHECK_THROWS_AS(parse_scenario(kEvolveZero, {"initial=[1, 2]"}), ConfigError);
    CHECK_THROWS_AS(parse_scenario(kEvolveZero, {"evolve=fast"}), ConfigError);
    CHECK_THROWS_AS(parse_scenario("- a\n- b\n"), ConfigError);
}
