// Timings of the OpenMP kernels against their serial reference paths:
// sparse generator matvec (the inner loop of uniformization) and the
// simulation ensemble runner.

#include <chrono>
#include <cstdio>
#include <vector>

#include "ipsavg/simulator.hpp"
#include "ipsavg/truncated_fp.hpp"

using namespace ips;

namespace {

double seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

void bench_matvec() {
    const Domain dom(1, 1.0);
    const SiteLattice lat = SiteLattice::uniform(dom, 20);
    const TruncatedSpace sp = TruncatedSpace::enumerate(20, 4);
    ModelParams p;
    const SparseGenerator G =
        build_system_generator(sp, lat, Configuration{}, p, dom, 0.1)
            .transposed();
    std::printf("matvec: dim=%zu nnz=%zu\n", G.dim(), G.nnz());

    std::vector<double> x(G.dim(), 1.0 / static_cast<double>(G.dim()));
    std::vector<double> y(G.dim());
    const int reps = 2000;

    for (Exec exec : {Exec::serial, Exec::parallel}) {
        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) {
            G.apply(std::span<const double>(x), std::span<double>(y), exec);
            x.swap(y);
        }
        const double dt = seconds(t0);
        std::printf("  %-8s %8.3f s  (%6.1f Mnnz/s)\n",
                    exec == Exec::serial ? "serial" : "parallel", dt,
                    static_cast<double>(G.nnz()) * reps / dt / 1e6);
    }
}

void bench_ensemble() {
    const Domain dom(1, 1.0);
    ModelParams p;
    p.m0 = 1.0;
    p.lambda0 = 1.2;
    EnvSpec env{EnvKind::free_glauber, 1.0, 0.01};
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.record_times = {1.0};
    const InitSampler init = [](const Domain& d, Rng& rng) {
        return sample_poisson(d, 20.0, rng);
    };
    const std::size_t replicas = 2000;
    std::printf("ensemble: %zu replicas, free_glauber eps=%.2g\n", replicas,
                env.epsilon);

    for (Exec exec : {Exec::serial, Exec::parallel}) {
        auto t0 = std::chrono::steady_clock::now();
        const auto ens =
            run_ensemble(replicas, 42, exec, [&](Rng& rng, std::size_t) {
                return simulate_coupled(p, env, init, cfg, dom, rng);
            });
        const double dt = seconds(t0);
        std::size_t events = 0;
        for (const auto& tr : ens)
            events += tr.births + tr.deaths + tr.env_events;
        std::printf("  %-8s %8.3f s  (%6.2f Mevents/s)\n",
                    exec == Exec::serial ? "serial" : "parallel", dt,
                    static_cast<double>(events) / dt / 1e6);
    }
}

}  // namespace

int main() {
    std::printf("threads available: %d\n", max_threads());
    bench_matvec();
    bench_ensemble();
    return 0;
}
