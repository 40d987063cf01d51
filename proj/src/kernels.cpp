#include "ipsavg/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ips {

KernelShape kernel_shape_from_string(const std::string& s) {
    if (s == "gaussian") return KernelShape::gaussian;
    if (s == "tophat") return KernelShape::tophat;
    if (s == "exponential") return KernelShape::exponential;
    throw std::invalid_argument("unknown kernel shape: " + s);
}

std::string to_string(KernelShape s) {
    switch (s) {
        case KernelShape::gaussian: return "gaussian";
        case KernelShape::tophat: return "tophat";
        case KernelShape::exponential: return "exponential";
    }
    return "?";
}

double KernelFunction::profile(double r) const {
    switch (shape) {
        case KernelShape::gaussian:
            return amplitude * std::exp(-0.5 * (r / range) * (r / range));
        case KernelShape::tophat:
            return r <= range ? amplitude : 0.0;
        case KernelShape::exponential:
            return amplitude * std::exp(-r / range);
    }
    return 0.0;
}

double kernel_mass(const KernelFunction& k, int dim) {
    if (dim < 1) throw std::invalid_argument("kernel_mass: dim must be >= 1");
    if (!(k.range > 0.0))
        throw std::invalid_argument("kernel_mass: range must be > 0");
    if (k.amplitude == 0.0) return 0.0;
    const double d = static_cast<double>(dim);
    switch (k.shape) {
        case KernelShape::gaussian:
            return k.amplitude *
                   std::pow(std::sqrt(2.0 * std::numbers::pi) * k.range, d);
        case KernelShape::tophat: {
            // ball volume: pi^{d/2} r^d / Gamma(d/2 + 1)
            const double ball = std::pow(std::numbers::pi, 0.5 * d) *
                                std::pow(k.range, d) /
                                std::exp(std::lgamma(0.5 * d + 1.0));
            return k.amplitude * ball;
        }
        case KernelShape::exponential: {
            // surface factor 2 pi^{d/2} / Gamma(d/2) times Gamma(d) r^d
            const double surface = 2.0 * std::pow(std::numbers::pi, 0.5 * d) /
                                   std::exp(std::lgamma(0.5 * d));
            return k.amplitude * surface * std::exp(std::lgamma(d)) *
                   std::pow(k.range, d);
        }
    }
    return 0.0;
}

double eval_kernel(const KernelFunction& k, const Domain& dom, const Point& x,
                   const Point& y) {
    return k.profile(torus_distance(dom, x, y));
}

namespace {

// Uniform direction on the (dim-1)-sphere; dim == 1 gives a fair sign.
std::vector<double> uniform_direction(int dim, Rng& rng) {
    std::vector<double> u(static_cast<std::size_t>(dim));
    if (dim == 1) {
        u[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        return u;
    }
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& c : u) {
            c = rng.normal();
            norm += c * c;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& c : u) c /= norm;
    return u;
}

}  // namespace

Point sample_displacement(const KernelFunction& k, const Domain& dom,
                          const Point& parent, Rng& rng) {
    const int dim = dom.dim;
    Point x = parent;
    switch (k.shape) {
        case KernelShape::gaussian: {
            for (int d = 0; d < dim; ++d) x[d] += k.range * rng.normal();
            break;
        }
        case KernelShape::tophat: {
            const auto dir = uniform_direction(dim, rng);
            const double r =
                k.range * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
            for (int d = 0; d < dim; ++d) x[d] += r * dir[d];
            break;
        }
        case KernelShape::exponential: {
            if (dim == 1) {
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                x[0] += sign * rng.exponential(1.0 / k.range);
            } else {
                // radial density ~ r^{dim-1} e^{-r/range}: Gamma(dim, range)
                double r = 0.0;
                for (int i = 0; i < dim; ++i) r += rng.exponential(1.0 / k.range);
                const auto dir = uniform_direction(dim, rng);
                for (int d = 0; d < dim; ++d) x[d] += r * dir[d];
            }
            break;
        }
    }
    return dom.wrap(std::move(x));
}

}  // namespace ips
