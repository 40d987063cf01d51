#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ipsavg/environment.hpp"
#include "ipsavg/logistic_model.hpp"
#include "ipsavg/parallel.hpp"

namespace ips {

struct SimConfig {
    double horizon = 1.0;
    std::vector<double> record_times;  // sorted, within [0, horizon]
    std::size_t max_population = 10000;
    double delta = 0.0;                // damping via thinning when > 0
    std::size_t audit_interval = 10000;
};

/// Trajectory::seed holds the replica's stream id within its ensemble.

/// One realized path: configurations at the record times, event counters and
/// the explosion flag. After an explosion (population cap exceeded) the
/// remaining record times hold the state at the stopping time.
struct Trajectory {
    std::vector<double> record_times;
    std::vector<Configuration> states;
    std::uint64_t seed = 0;
    std::size_t births = 0;
    std::size_t deaths = 0;
    std::size_t env_events = 0;
    std::size_t rejected = 0;  // damping thinning rejections
    bool exploded = false;
    double explosion_time = 0.0;
    std::size_t audits = 0;
    double max_audit_rel_error = 0.0;

    std::size_t population_at(double t) const;
    const Configuration& state_at(double t) const;
};

using InitSampler = std::function<Configuration(const Domain&, Rng&)>;

/// Exact event-driven simulation of the coupled jump process: competing
/// exponential clocks over the system rates and the environment rates at
/// speed 1/epsilon. Environment events adjust each particle's cached death
/// and fecundity contributions incrementally; the caches are audited against
/// a full recomputation every audit_interval events (1e-9 relative).
/// With cfg.delta > 0 the system rates are damped by thinning: a proposed
/// system event is accepted with probability e^{-delta q}.
Trajectory simulate_coupled(const ModelParams& p, const EnvSpec& env,
                            const InitSampler& init, const SimConfig& cfg,
                            const Domain& dom, Rng& rng);

/// Same engine with the environment terms replaced by their averages: death
/// m_bar(x) + competition, fecundity lambda_bar(x), no environment events.
Trajectory simulate_averaged(const ModelParams& p, const InitSampler& init,
                             const SimConfig& cfg, const Domain& dom, Rng& rng);

/// Runs n replicas with independent derived streams; replica r always uses
/// stream (seed, r), so the ensemble is identical for any thread count.
std::vector<Trajectory> run_ensemble(
    std::size_t n, std::uint64_t seed, Exec exec,
    const std::function<Trajectory(Rng&, std::size_t)>& make);

struct MomentEstimate {
    double mean = 0.0;
    double ci = 0.0;  // 3 standard errors
    std::size_t n = 0;
};

/// Monte Carlo mean of |eta_t|^k over an ensemble.
MomentEstimate estimate_moment(const std::vector<Trajectory>& ens, double t,
                               int k);

/// Distribution distances between two ensembles at a common record time for
/// the standard observables (population, count in the subwindow
/// [0, side/2) x first coordinate, nearest-neighbour torus distance):
/// two-sample Kolmogorov-Smirnov statistic and Wasserstein-1, each with a
/// bootstrap confidence interval.
struct DistanceRow {
    std::string observable;
    double ks = 0.0, ks_lo = 0.0, ks_hi = 0.0;
    double w1 = 0.0, w1_lo = 0.0, w1_hi = 0.0;
};

struct DistanceReport {
    double t = 0.0;
    std::vector<DistanceRow> rows;
};

DistanceReport compare_ensembles(const std::vector<Trajectory>& a,
                                 const std::vector<Trajectory>& b, double t,
                                 const Domain& dom, Rng& bootstrap_rng,
                                 int n_bootstrap = 200);

/// Observable extraction used by compare_ensembles and the CSV writers.
double observable_population(const Configuration& c, const Domain& dom);
double observable_subwindow(const Configuration& c, const Domain& dom);
double observable_nn_distance(const Configuration& c, const Domain& dom);

}  // namespace ips
