#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rcmdp/harness.hpp"

// Exit codes: 0 success / checks pass, 1 usage or config error,
// 2 runtime failure or failed bound check.
int main(int argc, char** argv) {
    CLI::App app{"robust constrained MDP experiment runner"};
    app.require_subcommand(1);

    std::string config_file;
    std::string dir;

    CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_file, "JSON config file")->required();

    CLI::App* plot = app.add_subcommand("plot", "render SVG plots from a run directory");
    plot->add_option("dir", dir, "experiment output directory")->required();

    CLI::App* check = app.add_subcommand(
        "check-bounds", "re-verify the recorded bound diagnostics in a run directory");
    check->add_option("dir", dir, "experiment output directory")->required();

    CLI::App* validate =
        app.add_subcommand("validate", "parse and validate a config file");
    validate->add_option("config", config_file, "JSON config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) {
            rcmdp::load_config(config_file);
            std::cout << "ok: " << config_file << "\n";
            return 0;
        }
        if (run->parsed()) {
            rcmdp::ExperimentConfig cfg;
            try {
                cfg = rcmdp::load_config(config_file);
            } catch (const std::invalid_argument& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
            auto out_dir = rcmdp::run_experiment(cfg);
            std::cout << "wrote " << (out_dir / "trace.csv").string() << "\n";
            return 0;
        }
        if (plot->parsed()) {
            for (const auto& p : rcmdp::emit_plots(dir))
                std::cout << "wrote " << p.string() << "\n";
            return 0;
        }
        if (check->parsed())
            return rcmdp::check_bounds(dir, std::cout) ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
