#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ipsavg/domain.hpp"
#include "ipsavg/parallel.hpp"
#include "ipsavg/rng.hpp"

namespace ips {

/// A finite simple point set. Iteration order is the insertion order and is
/// deterministic. With tolerance 0 only exact coordinate duplicates are
/// rejected (continuum samples collide with probability zero).
struct Configuration {
    std::vector<Point> points;
    double tolerance = 0.0;

    Configuration() = default;
    explicit Configuration(std::vector<Point> pts, double tol = 0.0)
        : points(std::move(pts)), tolerance(tol) {}
    Configuration(std::initializer_list<Point> pts) : points(pts) {}

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Throws if two points are closer (torus metric) than the tolerance, or, for
/// tolerance 0, coincide exactly.
void check_simple(const Configuration& cfg, const Domain& dom);

/// Poisson point process with the given intensity: the count is
/// Poisson(intensity * volume), positions i.i.d. uniform.
Configuration sample_poisson(const Domain& dom, double intensity, Rng& rng);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

/// Monte Carlo estimate of the Lebesgue-Poisson integral of G over the
/// configurations in the window: samples a unit-intensity Poisson process and
/// reweights by e^{volume}. Throws on a non-finite G value, naming the
/// offending configuration.
McEstimate lp_expectation(const std::function<double(const Configuration&)>& G,
                          const Domain& dom, std::size_t n_samples, Rng& rng,
                          Exec exec = Exec::parallel);

struct IbpReport {
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double rhs_se = 0.0;
    double combined_se = 0.0;
    bool pass = false;
};

/// Checks the sum-over-subconfigurations identity
///   integral of sum_{xi subset eta} G(xi, eta \ xi)  ==  double integral of G
/// by two independent Monte Carlo estimates; pass iff the gap is within
/// 3 combined standard errors. The subset sum refuses |eta| > 25.
IbpReport verify_ibp(
    const std::function<double(const Configuration&, const Configuration&)>& G,
    const Domain& dom, std::size_t n_samples, Rng& rng,
    Exec exec = Exec::parallel);

std::string to_json_string(const Configuration& cfg);

}  // namespace ips
