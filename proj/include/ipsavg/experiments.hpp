#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipsavg/environment.hpp"
#include "ipsavg/logistic_model.hpp"
#include "ipsavg/parallel.hpp"
#include "ipsavg/truncated_fp.hpp"

namespace ips {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind {
    ibp_test,
    lyapunov,
    averaging_sweep,
    delta_sweep,
    mc_compare,
    moment_bound,
    resolvent_check,
    stochasticity_probe,
};

ExperimentKind experiment_kind_from_string(const std::string& s);
std::string to_string(ExperimentKind k);

struct EnvChainSpec {
    std::string kind = "two_state";  // two_state | two_state_mean | two_state_sizes | resample_poisson
    double z = 1.0;
    double mean = 0.0;
    int size_a = 0, size_b = 0;
    int K = 2;

    EnvChain build(const Domain& dom) const;
};

struct TruncationSpec {
    int M = 3;
    int N = 2;
};

/// Everything a run needs; (config, seed) fully determines every output
/// byte. The canonical JSON dump of this struct is hashed into each CSV
/// header.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::ibp_test;
    std::uint64_t seed = 1;
    std::string output;  // default output directory; CLI --out wins
    Domain domain{1, 1.0};
    ModelParams model;
    EnvSpec env;
    EnvChainSpec env_chain;
    TruncationSpec truncation;
    std::vector<double> epsilons{1.0, 0.1, 0.01, 0.001};
    std::vector<double> deltas{1.0, 0.3, 0.1, 0.03, 0.01};
    double horizon = 1.0;
    int time_points = 11;
    std::size_t samples = 100000;   // MC integration sample count
    std::size_t replicas = 10000;   // simulation ensemble size
    int initial_population = 1;
    std::size_t max_population = 10000;
    double evolve_tol = 1e-10;
    // lyapunov experiment
    std::string phi = "constant";   // constant | one_plus_sq
    double lyapunov_c = 1.0;
    int grid_points = 33;
    double grid_halfwidth = 4.0;
    // probe experiment
    std::vector<int> probe_sizes{16, 32, 64, 128, 256, 512, 1024};
    double probe_time = 2.0;

    std::string canonical_json() const;
    std::string hash() const;
};

struct Violation {
    std::string path;
    std::string message;
    bool warning = false;
};

/// Schema and cross-field validation. Errors make run() exit with code 2;
/// warnings are printed but do not block.
std::vector<Violation> validate(const ExperimentConfig& cfg);

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

struct RunResult {
    int exit_code = 0;  // 0 pass, 1 criterion failed, 2 config, 3 numeric
    bool pass = false;
    std::string summary_json;
    std::vector<std::string> artifacts;
};

/// Runs one experiment: CSV artifacts plus a JSON summary into out_dir.
/// Numerical failures surface as exit code 3 with the module error message.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         Exec exec = Exec::parallel);

/// Checks existing artifacts in out_dir against the config hash (`--verify`).
/// Returns true when every artifact's stanza matches.
bool verify_artifacts(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::string& detail);

}  // namespace ips
