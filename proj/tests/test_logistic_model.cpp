#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ipsavg/logistic_model.hpp"
#include "ipsavg/sparse.hpp"
#include "ipsavg/truncated_fp.hpp"

using namespace ips;

namespace {

// pointwise kernel oracle: periodized evaluation done by hand
double gaussian_at(double amp, double sigma, double dist) {
    return amp * std::exp(-0.5 * dist * dist / (sigma * sigma));
}

}  // namespace

TEST_CASE("kernel_mass closed forms") {
    CHECK(kernel_mass({KernelShape::tophat, 1.0, 0.3}, 1) ==
          doctest::Approx(0.6));
    CHECK(kernel_mass({KernelShape::gaussian, 2.0, 0.4}, 1) ==
          doctest::Approx(2.0 * 0.4 * std::sqrt(2.0 * std::numbers::pi)));
    CHECK(kernel_mass({KernelShape::tophat, 0.0, 0.3}, 1) == 0.0);
    CHECK(kernel_mass({KernelShape::tophat, 2.0, 0.5}, 2) ==
          doctest::Approx(2.0 * std::numbers::pi * 0.25));
    CHECK(kernel_mass({KernelShape::exponential, 1.5, 0.2}, 1) ==
          doctest::Approx(2.0 * 1.5 * 0.2));
    CHECK(kernel_mass({KernelShape::exponential, 1.0, 0.5}, 2) ==
          doctest::Approx(2.0 * std::numbers::pi * 0.25));
}

TEST_CASE("death_rate") {
    const Domain dom(1, 1.0);
    ModelParams p;
    p.m0 = 0.7;
    p.a_minus = {KernelShape::tophat, 1.0, 0.2};
    p.kappa = {KernelShape::gaussian, 0.8, 0.1};

    SUBCASE("no neighbours, no environment") {
        Configuration eta({{0.5}});
        CHECK(death_rate({0.5}, eta, Configuration{}, p, dom) ==
              doctest::Approx(0.7));
    }
    SUBCASE("pair inside the competition range") {
        Configuration eta({{0.5}, {0.6}});
        CHECK(death_rate({0.5}, eta, Configuration{}, p, dom) ==
              doctest::Approx(1.7));
    }
    SUBCASE("environment point through the gaussian, against the oracle") {
        Configuration eta({{0.5}});
        Configuration gamma({{0.62}});
        CHECK(death_rate({0.5}, eta, gamma, p, dom) ==
              doctest::Approx(0.7 + gaussian_at(0.8, 0.1, 0.12)));
    }
    SUBCASE("membership is required") {
        Configuration eta({{0.5}});
        CHECK_THROWS(death_rate({0.25}, eta, Configuration{}, p, dom));
    }
}

TEST_CASE("fecundity") {
    const Domain dom(1, 1.0);
    ModelParams p;
    p.lambda0 = 1.1;
    p.psi = {KernelShape::gaussian, 0.5, 0.15};
    CHECK(fecundity({0.3}, Configuration{}, p, dom) == doctest::Approx(1.1));
    CHECK(fecundity({0.3}, Configuration({{0.3}}), p, dom) ==
          doctest::Approx(1.1 + 0.5));
    Configuration two({{0.35}, {0.9}});
    const double expected = 1.1 + gaussian_at(0.5, 0.15, 0.05) +
                            gaussian_at(0.5, 0.15, 0.4);
    CHECK(fecundity({0.3}, two, p, dom) == doctest::Approx(expected));
}

TEST_CASE("total_rate matches the per-particle decomposition") {
    const Domain dom(1, 1.0);
    ModelParams p;
    p.m0 = 0.4;
    p.lambda0 = 0.9;
    p.a_minus = {KernelShape::tophat, 0.6, 0.3};
    p.kappa = {KernelShape::gaussian, 0.3, 0.2};
    p.psi = {KernelShape::exponential, 0.2, 0.1};

    CHECK(total_rate(Configuration{}, Configuration{}, p, dom) == 0.0);
    CHECK(total_rate(Configuration({{0.5}}), Configuration{}, p, dom) ==
          doctest::Approx(0.4 + 0.9));
    // symmetric pair: competition counted once per particle
    Configuration pair({{0.5}, {0.7}});
    CHECK(total_rate(pair, Configuration{}, p, dom) ==
          doctest::Approx(2 * 0.4 + 2 * 0.6 + 2 * 0.9));

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Point> pts, env_pts;
        const int n = 1 + static_cast<int>(rng.uniform_index(6));
        const int m = static_cast<int>(rng.uniform_index(4));
        for (int i = 0; i < n; ++i) pts.push_back({rng.uniform()});
        for (int i = 0; i < m; ++i) env_pts.push_back({rng.uniform()});
        const Configuration eta(pts), gamma(env_pts);
        double direct = 0.0;
        for (std::size_t i = 0; i < eta.size(); ++i) {
            direct += death_rate_at(i, eta, gamma, p, dom);
            direct += fecundity(eta.points[i], gamma, p, dom);
        }
        REQUIRE(total_rate(eta, gamma, p, dom) == doctest::Approx(direct));
    }
}

TEST_CASE("monotonicity in the environment") {
    const Domain dom(1, 1.0);
    ModelParams p;
    p.kappa = {KernelShape::gaussian, 0.5, 0.2};
    p.psi = {KernelShape::exponential, 0.3, 0.15};
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        Configuration eta({{rng.uniform()}, {rng.uniform()}});
        std::vector<Point> env_pts;
        const int m = static_cast<int>(rng.uniform_index(4));
        for (int i = 0; i < m; ++i) env_pts.push_back({rng.uniform()});
        Configuration gamma(env_pts);
        Configuration bigger = gamma;
        bigger.points.push_back({rng.uniform()});
        REQUIRE(death_rate_at(0, eta, bigger, p, dom) >=
                death_rate_at(0, eta, gamma, p, dom));
        REQUIRE(fecundity(eta.points[0], bigger, p, dom) >=
                fecundity(eta.points[0], gamma, p, dom));
    }
}

TEST_CASE("damping") {
    CHECK(damping(3.7, 0.0) == 1.0);
    CHECK(damping(10.0, 0.2) == doctest::Approx(std::exp(-2.0)));
    const double delta = 0.25;
    CHECK(damping(1.0 / delta, delta) == doctest::Approx(std::exp(-1.0)));
    CHECK((1.0 / delta) * damping(1.0 / delta, delta) ==
          doctest::Approx(1.0 / (std::numbers::e * delta)));
    CHECK(damping(1e12, 0.5) == 0.0);
    CHECK_THROWS(damping(-1.0, 0.1));
}

TEST_CASE("damped rate never exceeds 1/(e delta)") {
    // calculus oracle: max of q e^{-delta q} is attained at q = 1/delta
    Rng rng(7);
    const double delta = 0.13;
    const double bound = 1.0 / (std::numbers::e * delta);
    double worst = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        const double q = rng.uniform(0.0, 200.0);
        worst = std::max(worst, q * damping(q, delta));
    }
    CHECK(worst <= bound + 1e-12);
    CHECK((1.0 / delta) * damping(1.0 / delta, delta) ==
          doctest::Approx(bound));
}

TEST_CASE("averaged_rates and beta") {
    ModelParams p;
    p.m0 = 1.0;
    p.z = 2.0;
    p.kappa = {KernelShape::tophat, 1.0, 0.25};  // mass 0.5
    p.lambda0 = 3.0;
    p.psi = {KernelShape::tophat, 0.5, 0.25};  // mass 0.25
    const AveragedRates r = averaged_rates(p, 1);
    CHECK(r.m_bar == doctest::Approx(2.0));
    CHECK(r.lambda_bar == doctest::Approx(3.5));

    ModelParams q = p;
    q.z = 0.0;
    const AveragedRates r0 = averaged_rates(q, 1);
    CHECK(r0.m_bar == doctest::Approx(q.m0));
    CHECK(r0.lambda_bar == doctest::Approx(q.lambda0));

    // spec's worked beta: lambda0=2, m0=1, <psi>=0.5, <kappa>=1, z=4 -> -1
    ModelParams b;
    b.lambda0 = 2.0;
    b.m0 = 1.0;
    b.psi = {KernelShape::tophat, 0.5, 0.5};
    b.kappa = {KernelShape::tophat, 1.0, 0.5};
    b.z = 4.0;
    CHECK(beta(b, 1) == doctest::Approx(-1.0));

    ModelParams crit = b;
    crit.z = (crit.lambda0 - crit.m0) /
             (kernel_mass(crit.kappa, 1) - kernel_mass(crit.psi, 1));
    CHECK(beta(crit, 1) == doctest::Approx(0.0));

    ModelParams zero = b;
    zero.z = 0.0;
    zero.lambda0 = zero.m0;
    CHECK(beta(zero, 1) == doctest::Approx(0.0));
}

TEST_CASE("lyapunov_check_logistic with constant phi") {
    // constant phi: condition reduces to lambda_bar <= c + m_bar
    ModelParams p;
    p.m0 = 1.0;
    p.lambda0 = 2.0;
    p.z = 0.0;
    p.a_plus = {KernelShape::gaussian, 1.0 / (0.1 * std::sqrt(2 * std::numbers::pi)), 0.1};
    const auto phi = [](const Point&) { return 1.0; };
    std::vector<Point> grid;
    for (int i = -8; i <= 8; ++i) grid.push_back({0.5 * i});

    const LyapunovReport holds = lyapunov_check_logistic(p, 1, phi, grid, 1.0);
    CHECK(holds.holds);
    CHECK(holds.worst_margin == doctest::Approx(0.0).epsilon(1e-6));

    ModelParams worse = p;
    worse.lambda0 = 3.0;
    const LyapunovReport fails = lyapunov_check_logistic(worse, 1, phi, grid, 1.0);
    CHECK_FALSE(fails.holds);
    CHECK(fails.worst_margin == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lyapunov_check_logistic with quadratic phi against the moment expansion") {
    // (a+ * phi)(x) = phi(x) + sigma^2 for phi = 1 + x^2 and symmetric a+
    const double sigma = 0.2;
    ModelParams p;
    p.m0 = 1.0;
    p.lambda0 = 2.0;
    p.z = 0.0;
    p.a_plus = {KernelShape::gaussian,
                1.0 / (sigma * std::sqrt(2 * std::numbers::pi)), sigma};
    const auto phi = [](const Point& x) { return 1.0 + x[0] * x[0]; };
    std::vector<Point> grid{{0.0}, {1.0}, {-2.0}, {3.5}};
    const double c = 1.0;

    const LyapunovReport rep =
        lyapunov_check_logistic(p, 1, phi, grid, c, 4096);
    double worst = -1e300;
    for (const Point& x : grid) {
        const double margin = p.lambda0 * (phi(x) + sigma * sigma) -
                              c * phi(x) - phi(x) * p.m0;
        worst = std::max(worst, margin);
    }
    CHECK(rep.worst_margin == doctest::Approx(worst).epsilon(1e-4));
}

TEST_CASE("generic_lyapunov_check") {
    SUBCASE("zero generator") {
        const SparseGenerator Q =
            SparseGenerator::from_triplets(3, Orientation::rates, {}, true);
        const std::vector<double> V{1.0, 2.0, 3.0};
        const auto rep = generic_lyapunov_check(Q, V, 0.0, 0.0);
        CHECK(rep.holds);
    }
    SUBCASE("pure-death chain, V(n) = n") {
        const SparseGenerator Q = SparseGenerator::from_triplets(
            3, Orientation::rates, {Triplet{1, 0, 1.0}, Triplet{2, 1, 1.0}},
            true);
        const std::vector<double> V{0.0, 1.0, 2.0};
        // drift is -1 at n >= 1, 0 at n = 0: c = 0, eps = 0 suffices
        const auto rep = generic_lyapunov_check(Q, V, 0.0, 0.0);
        CHECK(rep.holds);
        CHECK(rep.worst_margin == doctest::Approx(0.0));
    }
    SUBCASE("logistic truncation with V = |eta| and c = max(0, beta)") {
        const Domain dom(1, 1.0);
        ModelParams p;  // defaults: constant kernels, z = 1
        const SiteLattice lat = SiteLattice::uniform(dom, 3);
        const TruncatedSpace sp = TruncatedSpace::enumerate(3, 2);
        const EnvChain chain = EnvChain::two_state(p.z, {0.0});
        // c from the mu-averaged chain rates so the drift bound must hold
        const SparseGenerator Q =
            build_averaged_generator(sp, lat, chain, p, dom, 0.0);
        double lam = 0.0, m = 0.0;
        for (std::size_t k = 0; k < chain.size(); ++k) {
            lam += chain.mu[k] *
                   fecundity(lat.sites[0], chain.states[k], p, dom);
            double death = p.m0;
            for (const Point& w : chain.states[k].points)
                death += eval_kernel(p.kappa, dom, lat.sites[0], w);
            m += chain.mu[k] * death;
        }
        std::vector<double> V(sp.size());
        for (std::size_t s = 0; s < sp.size(); ++s)
            V[s] = static_cast<double>(sp.popcount(s));
        const auto rep =
            generic_lyapunov_check(Q, V, std::max(0.0, lam - m), 0.0);
        CHECK(rep.holds);
    }
    SUBCASE("dimension mismatch") {
        const SparseGenerator Q =
            SparseGenerator::from_triplets(3, Orientation::rates, {}, true);
        const std::vector<double> V{1.0};
        CHECK_THROWS(generic_lyapunov_check(Q, V, 0.0, 0.0));
    }
}
