#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ipsavg/environment.hpp"
#include "ipsavg/logistic_model.hpp"
#include "ipsavg/stats.hpp"

using namespace ips;

namespace {

EnvState evolve_to(EnvState state, const EnvSpec& spec, const Domain& dom,
                   double t, Rng& rng) {
    while (true) {
        EnvState next = state;
        const double dt = env_step(next, spec, dom, rng);
        if (!std::isfinite(dt) || next.clock > t) return state;
        state = std::move(next);
    }
}

}  // namespace

TEST_CASE("invariant sample") {
    const Domain dom(1, 1.0);
    Rng rng(21);
    EnvSpec zero{EnvKind::free_glauber, 0.0, 1.0};
    CHECK(env_invariant_sample(zero, dom, rng).gamma.empty());

    EnvSpec spec{EnvKind::free_glauber, 2.0, 1.0};
    const std::size_t n = 100000;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += static_cast<double>(env_invariant_sample(spec, dom, rng).gamma.size());
    const double mean = sum / static_cast<double>(n);
    CHECK(std::fabs(mean - 2.0) <= 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("free_glauber step from the empty state is a birth") {
    const Domain dom(1, 1.0);
    EnvSpec spec{EnvKind::free_glauber, 1.0, 1.0};
    Rng rng(22);
    const std::size_t n = 10000;
    double sum_dt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        EnvState s{Configuration{}, 0.0};
        const double dt = env_step(s, spec, dom, rng);
        REQUIRE(s.gamma.size() == 1);  // nothing can die
        sum_dt += dt;
    }
    // dt ~ Exp(1)
    CHECK(std::fabs(sum_dt / static_cast<double>(n) - 1.0) <=
          3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("resample waiting times scale with epsilon") {
    const Domain dom(1, 1.0);
    EnvSpec spec{EnvKind::resample, 1.0, 0.01};
    Rng rng(23);
    EnvState s{Configuration{}, 0.0};
    const std::size_t n = 10000;
    double sum_dt = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum_dt += env_step(s, spec, dom, rng);
    CHECK(std::fabs(sum_dt / static_cast<double>(n) - 0.01) <=
          3.0 * 0.01 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("frozen environment returns the no-event sentinel") {
    const Domain dom(1, 1.0);
    EnvSpec spec{EnvKind::frozen, 1.0, 1.0};
    Rng rng(24);
    EnvState s = env_invariant_sample(spec, dom, rng);
    const Configuration before = s.gamma;
    const double dt = env_step(s, spec, dom, rng);
    CHECK(std::isinf(dt));
    CHECK(s.gamma.points == before.points);
}

TEST_CASE("halving epsilon doubles the event rate") {
    const Domain dom(1, 1.0);
    Rng rng(25);
    const auto count_events = [&](double eps, std::uint64_t seed) {
        EnvSpec spec{EnvKind::free_glauber, 1.0, eps};
        Rng r(seed);
        double events = 0.0;
        for (int rep = 0; rep < 200; ++rep) {
            EnvState s = env_invariant_sample(spec, dom, r);
            while (true) {
                const double dt = env_step(s, spec, dom, r);
                if (!std::isfinite(dt) || s.clock > 50.0) break;
                events += 1.0;
            }
        }
        return events;
    };
    const double n1 = count_events(1.0, 31);
    const double n2 = count_events(0.5, 32);
    // Poisson-scale fluctuation band around the factor-two rate increase
    CHECK(std::fabs(n2 / n1 - 2.0) <=
          3.0 * 2.0 * (1.0 / std::sqrt(n1) + 1.0 / std::sqrt(n2)));
    (void)rng;
}

TEST_CASE("stationarity: the count marginal is time-invariant") {
    const Domain dom(1, 1.0);
    EnvSpec spec{EnvKind::free_glauber, 2.0, 1.0};
    Rng rng(26);
    for (double t : {0.5, 1.0, 5.0}) {
        std::vector<std::size_t> hist(25, 0);
        for (int rep = 0; rep < 4000; ++rep) {
            EnvState s = env_invariant_sample(spec, dom, rng);
            s = evolve_to(s, spec, dom, t, rng);
            ++hist[std::min(s.gamma.size(), hist.size() - 1)];
        }
        std::vector<double> probs(hist.size());
        for (std::size_t k = 0; k < probs.size(); ++k)
            probs[k] = poisson_pmf(static_cast<int>(k), 2.0);
        const Chi2Result res = chi2_gof(hist, probs);
        REQUIRE(res.p_value > 1e-3);
    }
}

TEST_CASE("time scaling: (eps, T) and (eps/k, T/k) give the same event counts") {
    const Domain dom(1, 1.0);
    const auto counts = [&](double eps, double T, std::uint64_t seed) {
        EnvSpec spec{EnvKind::free_glauber, 1.5, eps};
        std::vector<double> out;
        for (int rep = 0; rep < 1000; ++rep) {
            Rng r = Rng::derive(seed, static_cast<std::uint64_t>(rep));
            EnvState s = env_invariant_sample(spec, dom, r);
            double n = 0.0;
            while (true) {
                const double dt = env_step(s, spec, dom, r);
                if (!std::isfinite(dt) || s.clock > T) break;
                n += 1.0;
            }
            out.push_back(n);
        }
        return out;
    };
    const auto a = counts(1.0, 8.0, 41);
    const auto b = counts(0.25, 2.0, 42);
    CHECK(ks_statistic(a, b) <= ks_critical(1e-3, a.size(), b.size()));
}

TEST_CASE("ergodic averages") {
    const Domain dom(1, 1.0);
    EnvSpec spec{EnvKind::free_glauber, 2.0, 1.0};

    SUBCASE("constant functional is exact") {
        Rng rng(27);
        const auto avg = env_ergodic_average(
            [](const Configuration&) { return 3.25; }, spec, dom, 50.0, rng);
        CHECK(avg.avg == doctest::Approx(3.25));
        CHECK(avg.ci == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("mean count converges to z|L|") {
        Rng rng(28);
        const auto avg = env_ergodic_average(
            [](const Configuration& g) { return static_cast<double>(g.size()); },
            spec, dom, 1000.0, rng);
        CHECK(std::fabs(avg.avg - 2.0) <= avg.ci);
    }
    SUBCASE("m(x0, gamma) converges to the averaged mortality") {
        // Campbell: E sum kappa(x0 - w) = z <kappa> for the Poisson measure
        ModelParams p;
        p.m0 = 1.0;
        p.z = 2.0;
        p.kappa = {KernelShape::tophat, 1.0, 0.5};
        const Point x0{0.25};
        Configuration probe({x0});
        Rng rng(29);
        EnvSpec env{EnvKind::free_glauber, p.z, 1.0};
        const auto avg = env_ergodic_average(
            [&](const Configuration& g) {
                return death_rate(x0, probe, g, p, dom);
            },
            env, dom, 1000.0, rng);
        const AveragedRates bar = averaged_rates(p, 1);
        CHECK(std::fabs(avg.avg - bar.m_bar) <= avg.ci);
    }
    SUBCASE("frozen environment is rejected") {
        Rng rng(30);
        EnvSpec frozen{EnvKind::frozen, 1.0, 1.0};
        CHECK_THROWS_WITH_AS(
            env_ergodic_average([](const Configuration&) { return 0.0; },
                                frozen, dom, 10.0, rng),
            doctest::Contains("non-ergodic"), std::invalid_argument);
    }
}

TEST_CASE("ergodic averages converge at the Monte Carlo rate") {
    const Domain dom(1, 1.0);
    EnvSpec spec{EnvKind::free_glauber, 2.0, 1.0};
    const std::vector<double> horizons{10.0, 40.0, 160.0, 640.0};
    std::vector<double> log_T, log_rmse;
    std::uint64_t stream = 0;
    for (double T : horizons) {
        double se = 0.0;
        const int reps = 64;
        for (int rep = 0; rep < reps; ++rep) {
            Rng rng = Rng::derive(911, stream++);
            const auto avg = env_ergodic_average(
                [](const Configuration& g) {
                    return static_cast<double>(g.size());
                },
                spec, dom, T, rng);
            se += (avg.avg - 2.0) * (avg.avg - 2.0);
        }
        log_T.push_back(std::log(T));
        log_rmse.push_back(0.5 * std::log(se / reps));
    }
    const double slope = ols_slope(log_T, log_rmse);
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.2));
}
