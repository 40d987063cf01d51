#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ipsavg/experiments.hpp"
#include "ipsavg/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ipsavg — interacting-particle averaging experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int threads = 0;
    bool verify = false;

    CLI::App* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config_path, "experiment config (JSON)")
        ->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--threads", threads, "OpenMP thread count");
    run->add_flag("--verify", verify,
                  "check existing artifacts against the config hash instead "
                  "of running");

    CLI::App* val = app.add_subcommand("validate", "validate a config");
    val->add_option("config", config_path, "experiment config (JSON)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) ips::set_threads(threads);

    ips::ExperimentConfig cfg;
    try {
        cfg = ips::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    if (seed_set) cfg.seed = seed_override;
    if (out_dir.empty()) {
        // precedence: --out, then the config, then IPSAVG_OUT, then cwd
        const char* env_dir = std::getenv("IPSAVG_OUT");
        out_dir = !cfg.output.empty() ? cfg.output
                  : env_dir != nullptr ? env_dir
                                       : ".";
    }

    const auto violations = ips::validate(cfg);
    bool has_errors = false;
    for (const auto& v : violations) {
        std::cerr << (v.warning ? "warning: " : "error: ") << v.path << ": "
                  << v.message << "\n";
        if (!v.warning) has_errors = true;
    }

    if (val->parsed()) {
        if (!has_errors) std::cout << "config ok\n";
        return has_errors ? 2 : 0;
    }
    if (has_errors) return 2;

    if (verify) {
        std::string detail;
        const bool ok = ips::verify_artifacts(cfg, out_dir, detail);
        std::cout << detail;
        std::cout << (ok ? "verify ok\n" : "verify FAILED\n");
        return ok ? 0 : 1;
    }

    const ips::RunResult result = ips::run_experiment(cfg, out_dir);
    std::cout << result.summary_json << "\n";
    return result.exit_code;
}
