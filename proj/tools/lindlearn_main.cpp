// lindlearn command-line tool: drive the learning pipeline from a TOML config.
//
//   lindlearn print-config                # canonical default config to stdout
//   lindlearn simulate  --config run.toml # write plan.txt + trace CSVs
//   lindlearn recover   --config run.toml # fit traces -> recovery.csv, fits.json
//   lindlearn shadows   --config run.toml # overlap estimates -> shadows.csv
//   lindlearn figure fig3 --config run.toml  # methodology sweep -> fig3.csv
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.
#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "lindlearn/harness.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    std::string method;  // "", "interp", "fd" or "both"
    std::uint64_t seed = 0;
    bool seed_set = false;
    int qubits = 0;
};

// Attach the shared flags to a subcommand.
void add_common(CLI::App* cmd, CliOverrides* o) {
    cmd->add_option("--config", o->config_path, "TOML experiment config (default: built-in)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", o->seed, "override master_seed")
        ->each([o](const std::string&) { o->seed_set = true; });
    cmd->add_option("--out", o->out_dir, "override output_dir");
    cmd->add_option("--method", o->method, "override methods: interp, fd or both")
        ->check(CLI::IsMember({"interp", "fd", "both"}));
    cmd->add_option("--qubits", o->qubits, "override model.n_qubits (chip_preset models only)")
        ->check(CLI::PositiveNumber);
}

lindlearn::ExperimentConfig build_config(const CliOverrides& o) {
    using namespace lindlearn;
    ExperimentConfig cfg =
        o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (o.seed_set) cfg.master_seed = o.seed;
    if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
    if (!o.method.empty()) {
        if (o.method == "interp") cfg.methods = {"interpolation"};
        else if (o.method == "fd") cfg.methods = {"finite_difference"};
        else cfg.methods = {"interpolation", "finite_difference"};
    }
    if (o.qubits != 0) {
        if (cfg.model.kind != ModelSection::Kind::chip_preset)
            fail_config("--qubits only applies to chip_preset models");
        cfg.model.n_qubits = o.qubits;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learn Hamiltonian couplings and dissipation rates from short-time dynamics"};
    app.require_subcommand(1);
    CliOverrides overrides;
    std::string figure_which;

    CLI::App* simulate = app.add_subcommand("simulate", "simulate the planned time traces");
    add_common(simulate, &overrides);
    CLI::App* recover = app.add_subcommand("recover", "estimate parameters from trace files");
    add_common(recover, &overrides);
    CLI::App* shadows = app.add_subcommand("shadows", "estimate process-overlap entries");
    add_common(shadows, &overrides);
    CLI::App* figure = app.add_subcommand("figure", "run a methodology sweep table");
    figure->add_option("which", figure_which, "sweep name")
        ->required()
        ->check(CLI::IsMember({"fig2", "fig3", "fig4"}));
    add_common(figure, &overrides);
    app.add_subcommand("print-config", "write the canonical default config to stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit cleanly; bad usage is a config error
    }

    try {
        if (app.got_subcommand("print-config")) {
            std::cout << lindlearn::config_to_toml(lindlearn::ExperimentConfig{});
            return 0;
        }
        const lindlearn::ExperimentConfig cfg = build_config(overrides);
        if (app.got_subcommand(simulate)) lindlearn::cmd_simulate(cfg);
        else if (app.got_subcommand(recover)) lindlearn::cmd_recover(cfg);
        else if (app.got_subcommand(shadows)) lindlearn::cmd_shadows(cfg);
        else if (app.got_subcommand(figure)) lindlearn::cmd_figure(cfg, figure_which);
        return 0;
    } catch (const lindlearn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
