#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "hybrid/errors.hpp"
#include "hybrid/scenario.hpp"

namespace {

struct Args {
    std::string config;
    std::string out = ".";
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Args& a, bool with_out) {
    cmd->add_option("--config", a.config, "Scenario file (YAML)")->required();
    cmd->add_option("--override", a.overrides, "Replace a config value, e.g. evolve.dt=0.005");
    if (with_out) cmd->add_option("--out", a.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid classical-quantum phase-space simulator"};
    app.require_subcommand(1);
    Args args;
    auto* run = app.add_subcommand("run", "Run a scenario and write its outputs");
    add_common(run, args, true);
    auto* validate = app.add_subcommand("validate", "Parse and check a scenario without running it");
    add_common(validate, args, false);
    auto* terms = app.add_subcommand("dump-terms", "Print the compiled Liouvillian term list");
    add_common(terms, args, false);
    app.add_subcommand("version", "Print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("version")) {
            std::cout << "hybridsim " << HYBRIDSIM_VERSION << '\n';
            return 0;
        }
        const hybrid::Scenario s = hybrid::load_scenario(args.config, args.overrides);
        if (*validate) {
            std::cout << hybrid::dump_json(hybrid::validate(s));
        } else if (*terms) {
            std::cout << hybrid::scenario_terms(s).dump();
        } else {
            const auto res = hybrid::run_to_directory(s, args.out);
            for (const auto& [rel, text] : res.files.files()) std::cout << (std::filesystem::path(args.out) / rel).string() << '\n';
            if (res.report.contains("outcome_report"))
                for (const auto& w : res.report["outcome_report"].value("warnings", nlohmann::json::array()))
                    std::cerr << "warning: " << w.get<std::string>() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hybrid::exit_code_for(e);
    }
}
