#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ipsavg/configuration.hpp"
#include "ipsavg/stats.hpp"

using namespace ips;

TEST_CASE("torus distance: wrap-around, identity, direct") {
    const Domain d1(1, 1.0);
    CHECK(torus_distance(d1, {0.1}, {0.9}) == doctest::Approx(0.2));
    CHECK(torus_distance(d1, {0.3}, {0.3}) == 0.0);
    const Domain d2(2, 2.0);
    CHECK(torus_distance(d2, {0.0, 0.0}, {1.0, 1.0}) ==
          doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS(torus_distance(d2, {0.0}, {1.0, 1.0}));
}

TEST_CASE("torus distance: symmetry, bound and triangle inequality") {
    const Domain dom(2, 1.5);
    Rng rng(71);
    const double bound = 0.5 * dom.side * std::sqrt(2.0) + 1e-12;
    for (int i = 0; i < 10000; ++i) {
        const Point a{rng.uniform(0.0, dom.side), rng.uniform(0.0, dom.side)};
        const Point b{rng.uniform(0.0, dom.side), rng.uniform(0.0, dom.side)};
        const Point c{rng.uniform(0.0, dom.side), rng.uniform(0.0, dom.side)};
        const double ab = torus_distance(dom, a, b);
        REQUIRE(ab == torus_distance(dom, b, a));
        REQUIRE(ab <= bound);
        REQUIRE(ab <= torus_distance(dom, a, c) + torus_distance(dom, c, b) +
                          1e-12);
    }
}

TEST_CASE("sample_poisson: zero intensity and moments") {
    const Domain dom(1, 1.0);
    Rng rng(12);
    for (int i = 0; i < 50; ++i) CHECK(sample_poisson(dom, 0.0, rng).empty());
    CHECK_THROWS(sample_poisson(dom, -1.0, rng));

    const std::size_t n = 100000;
    const double z = 2.0;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = sample_poisson(dom, z, rng);
        const double k = static_cast<double>(c.size());
        sum += k;
        sum_sq += k * k;
        for (const Point& x : c.points) REQUIRE(dom.contains(x));
    }
    const double mean = sum / static_cast<double>(n);
    CHECK(std::fabs(mean - z) <= 3.0 * std::sqrt(z / static_cast<double>(n)));
    const double var =
        (sum_sq - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1);
    // Var(S^2) for Poisson: sigma^4 (2/(n-1)) + gamma_2 sigma^4 / n, gamma_2 = 1/z
    const double sd_var = std::sqrt(
        z * z * 2.0 / static_cast<double>(n - 1) + z / static_cast<double>(n) * z);
    CHECK(std::fabs(var - z) <= 3.0 * sd_var);
}

TEST_CASE("sample_poisson: chi-squared fit of the count distribution") {
    const Domain dom(1, 1.0);
    Rng rng(99);
    const double z = 2.0;
    const std::size_t n = 100000;
    std::vector<std::size_t> hist(30, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = sample_poisson(dom, z, rng).size();
        ++hist[std::min(k, hist.size() - 1)];
    }
    std::vector<double> probs(hist.size());
    for (std::size_t k = 0; k < probs.size(); ++k)
        probs[k] = poisson_pmf(static_cast<int>(k), z);
    const Chi2Result res = chi2_gof(hist, probs);
    CHECK(res.p_value > 1e-3);
}

TEST_CASE("simplicity check") {
    const Domain dom(1, 1.0);
    Configuration dup({{0.25}, {0.25}});
    CHECK_THROWS(check_simple(dup, dom));
    Configuration near({{0.25}, {0.2500001}}, 1e-3);
    CHECK_THROWS(check_simple(near, dom));
    Configuration ok({{0.25}, {0.75}});
    CHECK_NOTHROW(check_simple(ok, dom));
}

TEST_CASE("lp_expectation: constant, empty indicator, size") {
    const Domain dom(1, 1.0);
    const std::size_t n = 100000;
    const double e = std::numbers::e;

    Rng r1(301);
    const auto one = lp_expectation(
        [](const Configuration&) { return 1.0; }, dom, n, r1);
    CHECK(std::fabs(one.value - e) <= 3.0 * std::max(one.std_error, 1e-12));

    Rng r2(302);
    const auto empty = lp_expectation(
        [](const Configuration& c) { return c.empty() ? 1.0 : 0.0; }, dom, n,
        r2);
    CHECK(std::fabs(empty.value - 1.0) <= 3.0 * empty.std_error);

    // independent oracle: sum_n n |L|^n / n! = |L| e^{|L|} -> e at |L| = 1
    double series = 0.0;
    double factorial = 1.0;
    for (int k = 1; k <= 40; ++k) {
        factorial *= k;
        series += static_cast<double>(k) / factorial;
    }
    Rng r3(303);
    const auto size = lp_expectation(
        [](const Configuration& c) { return static_cast<double>(c.size()); },
        dom, n, r3);
    CHECK(std::fabs(size.value - series) <= 3.0 * size.std_error);
}

TEST_CASE("lp_expectation: error paths") {
    const Domain dom(1, 1.0);
    Rng rng(304);
    CHECK_THROWS(lp_expectation([](const Configuration&) { return 1.0; }, dom,
                                0, rng));
    Rng rng2(305);
    CHECK_THROWS_WITH_AS(
        lp_expectation(
            [](const Configuration& c) {
                return c.size() >= 1 ? std::numeric_limits<double>::quiet_NaN()
                                     : 0.0;
            },
            dom, 1000, rng2),
        doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("verify_ibp: named battery") {
    const Domain dom(1, 1.0);
    const double e = std::numbers::e;

    SUBCASE("indicator of both empty: both sides one") {
        Rng rng(311);
        const auto rep = verify_ibp(
            [](const Configuration& xi, const Configuration& eta) {
                return (xi.empty() && eta.empty()) ? 1.0 : 0.0;
            },
            dom, 100000, rng);
        CHECK(rep.pass);
        CHECK(std::fabs(rep.lhs - 1.0) <= 3.0 * std::max(rep.lhs_se, 1e-12));
        CHECK(std::fabs(rep.rhs - 1.0) <= 3.0 * std::max(rep.rhs_se, 1e-12));
    }
    SUBCASE("separable geometric: both sides e^{z1+z2}") {
        // binomial theorem: the subset sum telescopes to (z1+z2)^{|eta|}
        Rng rng(312);
        const auto rep = verify_ibp(
            [](const Configuration& xi, const Configuration& eta) {
                return std::pow(0.5, static_cast<double>(xi.size())) *
                       std::pow(0.5, static_cast<double>(eta.size()));
            },
            dom, 100000, rng);
        CHECK(rep.pass);
        CHECK(std::fabs(rep.lhs - e) <= 3.0 * rep.lhs_se);
        CHECK(std::fabs(rep.rhs - e) <= 3.0 * rep.rhs_se);
    }
    SUBCASE("size against empty: both sides e") {
        Rng rng(313);
        const auto rep = verify_ibp(
            [](const Configuration& xi, const Configuration& eta) {
                return eta.empty() ? static_cast<double>(xi.size()) : 0.0;
            },
            dom, 100000, rng);
        CHECK(rep.pass);
        CHECK(std::fabs(rep.lhs - e) <= 3.0 * rep.lhs_se);
        CHECK(std::fabs(rep.rhs - e) <= 3.0 * rep.rhs_se);
    }
}

TEST_CASE("verify_ibp: random separable products") {
    const Domain dom(1, 1.0);
    Rng gen(314);
    for (int trial = 0; trial < 2; ++trial) {
        const double a1 = gen.uniform(0.2, 0.6);
        const double b1 = gen.uniform(0.0, 0.4);
        const double a2 = gen.uniform(0.2, 0.6);
        const double b2 = gen.uniform(0.0, 0.4);
        Rng rng(320 + trial);
        const auto rep = verify_ibp(
            [&](const Configuration& xi, const Configuration& eta) {
                double p = 1.0;
                for (const Point& x : xi.points)
                    p *= a1 + b1 * std::sin(2.0 * std::numbers::pi * x[0]);
                for (const Point& y : eta.points)
                    p *= a2 + b2 * std::cos(2.0 * std::numbers::pi * y[0]);
                return p;
            },
            dom, 100000, rng);
        CHECK(rep.pass);
    }
}

TEST_CASE("verify_ibp: subset-size guard") {
    // volume 60: every unit-intensity sample exceeds 25 points and the guard
    // fires before any subset enumeration starts
    const Domain dom(1, 60.0);
    Rng rng(316);
    CHECK_THROWS_WITH_AS(
        verify_ibp([](const Configuration&, const Configuration&) { return 1.0; },
                   dom, 64, rng),
        doctest::Contains("|eta| > 25"), std::runtime_error);
}

TEST_CASE("configuration serializes to nested JSON arrays") {
    Configuration c({{0.5}, {0.25}});
    CHECK(to_json_string(c) == "[[0.5],[0.25]]");
    CHECK(to_json_string(Configuration{}) == "[]");
}
