#pragma once

#include <functional>
#include <string>

#include "ipsavg/configuration.hpp"
#include "ipsavg/domain.hpp"
#include "ipsavg/rng.hpp"

namespace ips {

/// Exactly simulable environment dynamics, all with invariant Poisson(z):
///   free_glauber — immigration at rate z*volume (uniform position), unit
///                  per-point death; ergodic, reversible w.r.t. Poisson(z).
///   resample     — at rate 1 the whole configuration is replaced by a fresh
///                  Poisson(z) draw; the extreme-mixing control.
///   frozen       — no events; the quenched, non-ergodic control.
/// All event rates are multiplied by 1/epsilon.
enum class EnvKind { free_glauber, resample, frozen };

EnvKind env_kind_from_string(const std::string& s);
std::string to_string(EnvKind k);

struct EnvSpec {
    EnvKind kind = EnvKind::free_glauber;
    double z = 1.0;
    double epsilon = 1.0;
};

struct EnvState {
    Configuration gamma;
    double clock = 0.0;
};

/// Draws from the invariant measure: gamma ~ Poisson(z), clock = 0.
EnvState env_invariant_sample(const EnvSpec& spec, const Domain& dom, Rng& rng);

/// Total event rate of the environment (before the 1/epsilon speed-up).
double env_event_rate(const EnvState& state, const EnvSpec& spec,
                      const Domain& dom);

/// Advances one event: returns the waiting time (already at the 1/epsilon
/// time scale) and mutates the state. frozen returns +inf and leaves the
/// state unchanged.
double env_step(EnvState& state, const EnvSpec& spec, const Domain& dom,
                Rng& rng);

struct ErgodicAverage {
    double avg = 0.0;
    double ci = 0.0;  // half-width, batch-means, ~99.7% level
};

/// Time-weighted average (1/T) int_0^T f(gamma_t) dt along one trajectory
/// started from the invariant measure, with a batch-means confidence
/// interval. Throws for the frozen (non-ergodic) environment.
ErgodicAverage env_ergodic_average(
    const std::function<double(const Configuration&)>& f, const EnvSpec& spec,
    const Domain& dom, double T, Rng& rng, int n_batches = 32);

}  // namespace ips
