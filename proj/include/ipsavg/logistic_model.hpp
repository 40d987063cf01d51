#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ipsavg/configuration.hpp"
#include "ipsavg/kernels.hpp"

namespace ips {

class SparseGenerator;

/// Rate data of the spatial logistic model in an environment:
/// per-particle death m0 + sum_w kappa(x-w) + sum_y a_minus(x-y),
/// per-particle fecundity lambda0 + sum_w psi(x-w), offspring displacement
/// density a_plus, damping parameter delta.
struct ModelParams {
    double m0 = 1.0;
    double lambda0 = 2.0;
    double z = 1.0;
    double delta = 0.0;
    KernelFunction a_plus{KernelShape::tophat, 1.0, 0.5};
    KernelFunction a_minus{KernelShape::tophat, 0.5, 0.5};
    KernelFunction kappa{KernelShape::tophat, 1.0, 0.5};
    KernelFunction psi{KernelShape::tophat, 0.5, 0.5};
};

/// Death intensity of the particle at x in eta, environment gamma.
/// x must be a point of eta (exact coordinate match), else throws.
double death_rate(const Point& x, const Configuration& eta,
                  const Configuration& gamma, const ModelParams& p,
                  const Domain& dom);

/// Same, addressed by index into eta (no membership scan).
double death_rate_at(std::size_t i, const Configuration& eta,
                     const Configuration& gamma, const ModelParams& p,
                     const Domain& dom);

double fecundity(const Point& x, const Configuration& gamma,
                 const ModelParams& p, const Domain& dom);

/// Total outflow rate q: all death rates plus all fecundities (the dispersal
/// kernel has mass one, so the per-parent total birth rate equals the
/// fecundity).
double total_rate(const Configuration& eta, const Configuration& gamma,
                  const ModelParams& p, const Domain& dom);

/// e^{-delta q}. The damped rate q*damping(q,delta) is bounded by
/// 1/(e*delta) for delta > 0.
double damping(double q, double delta);

struct AveragedRates {
    double m_bar = 0.0;
    double lambda_bar = 0.0;
};

/// Environment-averaged intensities for the Poisson(z) environment:
/// m_bar = m0 + z<kappa>, lambda_bar = lambda0 + z<psi>.
AveragedRates averaged_rates(const ModelParams& p, int dim);

/// Net averaged growth rate lambda_bar - m_bar.
double beta(const ModelParams& p, int dim);

struct LyapunovReport {
    bool holds = false;
    double worst_margin = 0.0;  // max of lhs - rhs; <= 0 means the bound holds
    Point worst_x;
};

/// Checks lambda_bar*(a_plus * phi)(x) <= c phi(x) + phi(x) m_bar(x) on the
/// given grid. The convolution is full-space (not periodized) trapezoidal
/// quadrature with quad_order nodes per dimension over a kernel-dependent
/// effective support.
LyapunovReport lyapunov_check_logistic(
    const ModelParams& p, int dim,
    const std::function<double(const Point&)>& phi,
    const std::vector<Point>& grid, double c, int quad_order = 1024);

struct GeneratorDriftReport {
    bool holds = false;
    double worst_margin = 0.0;
    std::size_t worst_row = 0;
    std::vector<std::size_t> violating_rows;
};

/// Row-wise drift condition on a rates-form generator:
/// sum_{j != i} Q(i,j) (V_j - V_i) <= c (1 + V_i) - eps q_i, with q_i the
/// actual outflow of row i.
GeneratorDriftReport generic_lyapunov_check(const SparseGenerator& Q,
                                            std::span<const double> V,
                                            double c, double eps);

}  // namespace ips
