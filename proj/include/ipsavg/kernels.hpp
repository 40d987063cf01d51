#pragma once

#include <string>

#include "ipsavg/configuration.hpp"
#include "ipsavg/domain.hpp"
#include "ipsavg/rng.hpp"

namespace ips {

enum class KernelShape { gaussian, tophat, exponential };

KernelShape kernel_shape_from_string(const std::string& s);
std::string to_string(KernelShape s);

/// Radial interaction kernel. Profiles:
///   gaussian:     A * exp(-r^2 / (2 range^2))
///   tophat:       A * 1{r <= range}
///   exponential:  A * exp(-r / range)
/// Evaluated through the minimum-image torus distance; the closed-form mass
/// is the full-space integral (pre-periodization).
struct KernelFunction {
    KernelShape shape = KernelShape::tophat;
    double amplitude = 0.0;
    double range = 1.0;

    double profile(double r) const;
};

/// Closed-form integral over d-dimensional space.
double kernel_mass(const KernelFunction& k, int dim);

/// k(|x - y|) with the periodic minimum-image metric.
double eval_kernel(const KernelFunction& k, const Domain& dom, const Point& x,
                   const Point& y);

/// Draws an offspring displacement from the kernel interpreted as a
/// probability density (mass must be ~1): gaussian by per-coordinate
/// Box-Muller, tophat uniformly in the ball, exponential by inverse-CDF
/// radius (Gamma(dim) radial part for dim > 1) and a uniform direction.
/// The result is wrapped into the domain.
Point sample_displacement(const KernelFunction& k, const Domain& dom,
                          const Point& parent, Rng& rng);

}  // namespace ips
