#include "ipsavg/configuration.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ipsavg/stats.hpp"

namespace ips {

double torus_distance(const Domain& dom, const Point& x, const Point& y) {
    if (static_cast<int>(x.size()) != dom.dim ||
        static_cast<int>(y.size()) != dom.dim) {
        throw std::invalid_argument("torus_distance: dimension mismatch");
    }
    double sum_sq = 0.0;
    for (int i = 0; i < dom.dim; ++i) {
        double diff = std::fabs(x[i] - y[i]);
        if (diff > 0.5 * dom.side) diff = dom.side - diff;
        sum_sq += diff * diff;
    }
    return std::sqrt(sum_sq);
}

void check_simple(const Configuration& cfg, const Domain& dom) {
    const std::size_t n = cfg.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (cfg.tolerance == 0.0) {
                if (cfg.points[i] == cfg.points[j])
                    throw std::invalid_argument(
                        "Configuration: duplicate point");
            } else if (torus_distance(dom, cfg.points[i], cfg.points[j]) <
                       cfg.tolerance) {
                throw std::invalid_argument(
                    "Configuration: points closer than tolerance");
            }
        }
    }
}

Configuration sample_poisson(const Domain& dom, double intensity, Rng& rng) {
    if (intensity < 0.0)
        throw std::invalid_argument("sample_poisson: negative intensity");
    const int n = rng.poisson(intensity * dom.volume());
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Point x(static_cast<std::size_t>(dom.dim));
        for (int d = 0; d < dom.dim; ++d) x[d] = rng.uniform(0.0, dom.side);
        pts.push_back(std::move(x));
    }
    return Configuration(std::move(pts));
}

std::string to_json_string(const Configuration& cfg) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < cfg.points.size(); ++i) {
        if (i) os << ",";
        os << "[";
        for (std::size_t d = 0; d < cfg.points[i].size(); ++d) {
            if (d) os << ",";
            os << cfg.points[i][d];
        }
        os << "]";
    }
    os << "]";
    return os.str();
}

namespace {

// Fixed block count so the partial sums (and hence the final serial
// reduction) do not depend on the thread count.
constexpr std::size_t kBlocks = 256;

struct BlockSums {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    bool bad = false;
    std::string bad_what;
};

template <typename Sampler>
MeanSe blocked_mc(std::size_t n_samples, Rng& rng, Exec exec,
                  const Sampler& one_sample) {
    if (n_samples < 1)
        throw std::invalid_argument("monte carlo: n_samples must be >= 1");
    const std::uint64_t master = rng.raw();
    std::vector<BlockSums> blocks(kBlocks);
    parallel_for(kBlocks, exec, [&](std::size_t b) {
        Rng block_rng = Rng::derive(master, b);
        const std::size_t lo = n_samples * b / kBlocks;
        const std::size_t hi = n_samples * (b + 1) / kBlocks;
        BlockSums& acc = blocks[b];
        for (std::size_t i = lo; i < hi; ++i) {
            double v;
            try {
                v = one_sample(block_rng);
            } catch (const std::exception& e) {
                acc.bad = true;
                acc.bad_what = e.what();
                return;
            }
            acc.sum += v;
            acc.sum_sq += v * v;
            ++acc.n;
        }
    });
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const BlockSums& b : blocks) {
        if (b.bad) throw std::runtime_error(b.bad_what);
        sum += b.sum;
        sum_sq += b.sum_sq;
        n += b.n;
    }
    MeanSe out;
    out.n = n;
    out.mean = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, sum_sq / static_cast<double>(n) - out.mean * out.mean);
    out.se = std::sqrt(var / static_cast<double>(n));
    return out;
}

double require_finite(double v, const Configuration& cfg) {
    if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite integrand value at configuration " +
                                 to_json_string(cfg));
    }
    return v;
}

}  // namespace

McEstimate lp_expectation(const std::function<double(const Configuration&)>& G,
                          const Domain& dom, std::size_t n_samples, Rng& rng,
                          Exec exec) {
    const double weight = std::exp(dom.volume());
    const MeanSe ms = blocked_mc(n_samples, rng, exec, [&](Rng& r) {
        const Configuration eta = sample_poisson(dom, 1.0, r);
        return require_finite(G(eta), eta);
    });
    return McEstimate{weight * ms.mean, weight * ms.se, ms.n};
}

IbpReport verify_ibp(
    const std::function<double(const Configuration&, const Configuration&)>& G,
    const Domain& dom, std::size_t n_samples, Rng& rng, Exec exec) {
    // LHS: one Poisson sample, exact sum over all 2^|eta| splittings.
    const double w1 = std::exp(dom.volume());
    const MeanSe lhs = blocked_mc(n_samples, rng, exec, [&](Rng& r) {
        const Configuration eta = sample_poisson(dom, 1.0, r);
        const std::size_t n = eta.size();
        if (n > 25)
            throw std::runtime_error(
                "verify_ibp: subset sum over |eta| > 25 refused");
        double s = 0.0;
        const std::uint32_t top = 1u << n;
        std::vector<Point> in, out;
        for (std::uint32_t m = 0; m < top; ++m) {
            in.clear();
            out.clear();
            for (std::size_t i = 0; i < n; ++i) {
                if (m & (1u << i))
                    in.push_back(eta.points[i]);
                else
                    out.push_back(eta.points[i]);
            }
            s += require_finite(G(Configuration(in), Configuration(out)), eta);
        }
        return s;
    });
    // RHS: independent pair of Poisson samples.
    const double w2 = std::exp(2.0 * dom.volume());
    const MeanSe rhs = blocked_mc(n_samples, rng, exec, [&](Rng& r) {
        const Configuration xi = sample_poisson(dom, 1.0, r);
        const Configuration eta = sample_poisson(dom, 1.0, r);
        return require_finite(G(xi, eta), xi);
    });

    IbpReport rep;
    rep.lhs = w1 * lhs.mean;
    rep.lhs_se = w1 * lhs.se;
    rep.rhs = w2 * rhs.mean;
    rep.rhs_se = w2 * rhs.se;
    rep.combined_se = std::hypot(rep.lhs_se, rep.rhs_se);
    rep.pass = std::fabs(rep.lhs - rep.rhs) <= 3.0 * rep.combined_se;
    return rep;
}

}  // namespace ips
