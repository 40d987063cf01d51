#include "ipsavg/environment.hpp"

#include <cmath>
#include <stdexcept>

#include "ipsavg/stats.hpp"

namespace ips {

EnvKind env_kind_from_string(const std::string& s) {
    if (s == "free_glauber") return EnvKind::free_glauber;
    if (s == "resample") return EnvKind::resample;
    if (s == "frozen") return EnvKind::frozen;
    throw std::invalid_argument("unknown environment kind: " + s);
}

std::string to_string(EnvKind k) {
    switch (k) {
        case EnvKind::free_glauber: return "free_glauber";
        case EnvKind::resample: return "resample";
        case EnvKind::frozen: return "frozen";
    }
    return "?";
}

EnvState env_invariant_sample(const EnvSpec& spec, const Domain& dom, Rng& rng) {
    if (spec.z < 0.0)
        throw std::invalid_argument("env_invariant_sample: negative intensity");
    return EnvState{sample_poisson(dom, spec.z, rng), 0.0};
}

double env_event_rate(const EnvState& state, const EnvSpec& spec,
                      const Domain& dom) {
    switch (spec.kind) {
        case EnvKind::free_glauber:
            return spec.z * dom.volume() + static_cast<double>(state.gamma.size());
        case EnvKind::resample:
            return 1.0;
        case EnvKind::frozen:
            return 0.0;
    }
    return 0.0;
}

double env_step(EnvState& state, const EnvSpec& spec, const Domain& dom,
                Rng& rng) {
    if (!(spec.epsilon > 0.0))
        throw std::invalid_argument("env_step: epsilon must be > 0");
    const double rate = env_event_rate(state, spec, dom) / spec.epsilon;
    const double dt = rng.exponential(rate);
    if (!std::isfinite(dt)) return dt;  // frozen (or empty z=0): sentinel
    state.clock += dt;
    switch (spec.kind) {
        case EnvKind::free_glauber: {
            const double birth_rate = spec.z * dom.volume();
            const double total =
                birth_rate + static_cast<double>(state.gamma.size());
            if (rng.uniform() * total < birth_rate) {
                Point x(static_cast<std::size_t>(dom.dim));
                for (int d = 0; d < dom.dim; ++d)
                    x[d] = rng.uniform(0.0, dom.side);
                state.gamma.points.push_back(std::move(x));
            } else {
                const std::size_t i = rng.uniform_index(state.gamma.size());
                state.gamma.points[i] = state.gamma.points.back();
                state.gamma.points.pop_back();
            }
            break;
        }
        case EnvKind::resample:
            state.gamma = sample_poisson(dom, spec.z, rng);
            break;
        case EnvKind::frozen:
            break;
    }
    return dt;
}

ErgodicAverage env_ergodic_average(
    const std::function<double(const Configuration&)>& f, const EnvSpec& spec,
    const Domain& dom, double T, Rng& rng, int n_batches) {
    if (spec.kind == EnvKind::frozen)
        throw std::invalid_argument(
            "env_ergodic_average: non-ergodic environment");
    if (!(T > 0.0)) throw std::invalid_argument("env_ergodic_average: T <= 0");
    if (n_batches < 2)
        throw std::invalid_argument("env_ergodic_average: need >= 2 batches");

    EnvState state = env_invariant_sample(spec, dom, rng);
    const double batch_len = T / static_cast<double>(n_batches);
    std::vector<double> batch(static_cast<std::size_t>(n_batches), 0.0);

    double t = 0.0;
    double value = f(state.gamma);
    while (t < T) {
        EnvState next = state;
        const double dt = env_step(next, spec, dom, rng);
        double t_next = std::isfinite(dt) ? t + dt : T;
        if (t_next > T) t_next = T;
        // spread the holding interval [t, t_next) over the batches it covers
        double a = t;
        while (a < t_next) {
            const int bi = std::min(n_batches - 1,
                                    static_cast<int>(a / batch_len));
            const double b_end = batch_len * static_cast<double>(bi + 1);
            const double b = std::min(t_next, b_end);
            batch[static_cast<std::size_t>(bi)] += value * (b - a);
            a = b;
        }
        if (!std::isfinite(dt) || t + dt > T) break;
        state = std::move(next);
        value = f(state.gamma);
        t += dt;
    }

    for (double& v : batch) v /= batch_len;
    const MeanSe ms = mean_se(batch);
    const double tq = student_t_quantile(0.997, n_batches - 1);
    return ErgodicAverage{ms.mean, tq * ms.se};
}

}  // namespace ips
