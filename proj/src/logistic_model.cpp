#include "ipsavg/logistic_model.hpp"

#include <cmath>
#include <stdexcept>

#include "ipsavg/sparse.hpp"

namespace ips {

double death_rate_at(std::size_t i, const Configuration& eta,
                     const Configuration& gamma, const ModelParams& p,
                     const Domain& dom) {
    const Point& x = eta.points[i];
    double rate = p.m0;
    for (const Point& w : gamma.points) rate += eval_kernel(p.kappa, dom, x, w);
    for (std::size_t j = 0; j < eta.size(); ++j) {
        if (j == i) continue;
        rate += eval_kernel(p.a_minus, dom, x, eta.points[j]);
    }
    return rate;
}

double death_rate(const Point& x, const Configuration& eta,
                  const Configuration& gamma, const ModelParams& p,
                  const Domain& dom) {
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (eta.points[i] == x) return death_rate_at(i, eta, gamma, p, dom);
    }
    throw std::invalid_argument("death_rate: x is not a point of eta");
}

double fecundity(const Point& x, const Configuration& gamma,
                 const ModelParams& p, const Domain& dom) {
    double rate = p.lambda0;
    for (const Point& w : gamma.points) rate += eval_kernel(p.psi, dom, x, w);
    return rate;
}

double total_rate(const Configuration& eta, const Configuration& gamma,
                  const ModelParams& p, const Domain& dom) {
    double q = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        q += death_rate_at(i, eta, gamma, p, dom);
        q += fecundity(eta.points[i], gamma, p, dom);
    }
    return q;
}

double damping(double q, double delta) {
    if (q < 0.0 || delta < 0.0)
        throw std::invalid_argument("damping: q and delta must be >= 0");
    return std::exp(-delta * q);
}

AveragedRates averaged_rates(const ModelParams& p, int dim) {
    AveragedRates r;
    r.m_bar = p.m0 + p.z * kernel_mass(p.kappa, dim);
    r.lambda_bar = p.lambda0 + p.z * kernel_mass(p.psi, dim);
    return r;
}

double beta(const ModelParams& p, int dim) {
    const AveragedRates r = averaged_rates(p, dim);
    return r.lambda_bar - r.m_bar;
}

namespace {

// Effective one-sided support of a radial kernel, wide enough that the
// truncated tail is far below the quadrature discretization error.
double quad_halfwidth(const KernelFunction& k) {
    switch (k.shape) {
        case KernelShape::gaussian: return 12.0 * k.range;
        case KernelShape::tophat: return k.range;
        case KernelShape::exponential: return 60.0 * k.range;
    }
    return k.range;
}

}  // namespace

LyapunovReport lyapunov_check_logistic(
    const ModelParams& p, int dim,
    const std::function<double(const Point&)>& phi,
    const std::vector<Point>& grid, double c, int quad_order) {
    if (grid.empty())
        throw std::invalid_argument("lyapunov_check_logistic: empty grid");
    if (quad_order < 2)
        throw std::invalid_argument("lyapunov_check_logistic: quad_order < 2");
    if (dim != 1)
        throw std::invalid_argument(
            "lyapunov_check_logistic: quadrature implemented for dim == 1");

    const AveragedRates avg = averaged_rates(p, dim);
    const double R = quad_halfwidth(p.a_plus);
    const double h = 2.0 * R / static_cast<double>(quad_order);

    // Trapezoid weights for the dispersal kernel on [-R, R]; sanity check the
    // quadrature reproduces the unit mass.
    std::vector<double> nodes(static_cast<std::size_t>(quad_order) + 1);
    std::vector<double> weights(nodes.size());
    double quad_mass = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = -R + h * static_cast<double>(i);
        const double w = (i == 0 || i + 1 == nodes.size()) ? 0.5 * h : h;
        weights[i] = w * p.a_plus.profile(std::fabs(nodes[i]));
        quad_mass += weights[i];
    }
    if (!(std::fabs(quad_mass - kernel_mass(p.a_plus, dim)) < 1e-3))
        throw std::runtime_error(
            "lyapunov_check_logistic: quadrature failure (dispersal mass)");

    LyapunovReport rep;
    rep.holds = true;
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    for (const Point& x : grid) {
        const double phi_x = phi(x);
        if (!(phi_x >= 1.0))
            throw std::invalid_argument(
                "lyapunov_check_logistic: phi must be >= 1 on the grid");
        double conv = 0.0;
        Point shifted = x;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            shifted[0] = x[0] - nodes[i];
            conv += weights[i] * phi(shifted);
        }
        const double margin = avg.lambda_bar * conv - c * phi_x - phi_x * avg.m_bar;
        if (!std::isfinite(margin))
            throw std::runtime_error("lyapunov_check_logistic: quadrature failure");
        if (margin > rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_x = x;
        }
        if (margin > 1e-12) rep.holds = false;
    }
    return rep;
}

GeneratorDriftReport generic_lyapunov_check(const SparseGenerator& Q,
                                            std::span<const double> V,
                                            double c, double eps) {
    if (Q.orientation() != Orientation::rates)
        throw std::invalid_argument(
            "generic_lyapunov_check: generator must be in rates form");
    if (V.size() != Q.dim())
        throw std::invalid_argument("generic_lyapunov_check: dimension mismatch");

    GeneratorDriftReport rep;
    rep.holds = true;
    rep.worst_margin = -std::numeric_limits<double>::infinity();

    const auto triplets = Q.to_triplets();
    std::vector<double> drift(Q.dim(), 0.0);
    std::vector<double> outflow(Q.dim(), 0.0);
    for (const Triplet& tr : triplets) {
        if (tr.row == tr.col) continue;
        drift[tr.row] += tr.value * (V[tr.col] - V[tr.row]);
        outflow[tr.row] += tr.value;
    }
    for (std::size_t i = 0; i < Q.dim(); ++i) {
        const double margin = drift[i] - (c * (1.0 + V[i]) - eps * outflow[i]);
        if (margin > rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_row = i;
        }
        if (margin > 1e-12) {
            rep.holds = false;
            rep.violating_rows.push_back(i);
        }
    }
    return rep;
}

}  // namespace ips
