#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ips {

using Point = std::vector<double>;

/// Periodic box [0, side)^dim. Replaces unbounded space so that every
/// sampling window is finite and kernels have no boundary effects.
struct Domain {
    int dim = 1;
    double side = 1.0;

    Domain() = default;
    Domain(int d, double L) : dim(d), side(L) {
        if (d < 1) throw std::invalid_argument("Domain: dim must be >= 1");
        if (!(L > 0.0)) throw std::invalid_argument("Domain: side must be > 0");
    }

    double volume() const { return std::pow(side, dim); }

    bool contains(const Point& x) const {
        if (static_cast<int>(x.size()) != dim) return false;
        for (double c : x)
            if (!(c >= 0.0) || !(c < side)) return false;
        return true;
    }

    /// Wraps a coordinate vector into the box.
    Point wrap(Point x) const {
        for (double& c : x) {
            c = std::fmod(c, side);
            if (c < 0.0) c += side;
        }
        return x;
    }
};

/// Minimum-image Euclidean distance on the torus. Symmetric and bounded by
/// side*sqrt(dim)/2.
double torus_distance(const Domain& dom, const Point& x, const Point& y);

}  // namespace ips
