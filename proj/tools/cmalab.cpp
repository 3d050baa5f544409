// Command-line front end: run, list, validate.
#include <iostream>

#include <CLI11.hpp>

#include "cmalab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Monge-Ampere envelope laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_root;
    bool single_thread = false;

    auto* run = app.add_subcommand("run", "run a config and write its artifact directory");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_root, "output root (default: $CMALAB_OUTPUT_ROOT, then ./runs)");
    run->add_flag("--single-thread", single_thread, "run every solve serially");

    auto* list = app.add_subcommand("list", "list the registered recipes");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "check a config and print its resolved form");
    validate->add_option("config", validate_path, "experiment config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : cmalab::kConfigFailure;
    }

    if (list->parsed()) {
        std::cout << cmalab::recipe_table();
        return 0;
    }
    try {
        if (validate->parsed()) {
            const auto cfg = cmalab::load_config(validate_path);
            std::cout << cfg.resolved.dump(2) << "\n";
            return 0;
        }
        const auto cfg = cmalab::load_config(config_path);
        cmalab::RunOptions opt;
        if (!out_root.empty()) opt.output_root = out_root;
        opt.single_thread = single_thread;
        const auto res = cmalab::run_experiment(cfg, opt);
        if (res.exit_code != 0) std::cerr << "cmalab: " << res.message << "\n";
        std::cout << res.directory.string() << "\n";
        return res.exit_code;
    } catch (const cmalab::ConfigError& e) {
        std::cerr << "cmalab: config error: " << e.what() << "\n";
        return cmalab::kConfigFailure;
    }
}
