#include "ipsavg/truncated_fp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ipsavg/stats.hpp"

namespace ips {

SiteLattice SiteLattice::uniform(const Domain& dom, int n_sites) {
    if (n_sites < 1)
        throw std::invalid_argument("SiteLattice: need at least one site");
    const double per_side = std::pow(static_cast<double>(n_sites),
                                     1.0 / static_cast<double>(dom.dim));
    const int m = static_cast<int>(std::llround(per_side));
    if (std::pow(static_cast<double>(m), dom.dim) !=
        static_cast<double>(n_sites))
        throw std::invalid_argument(
            "SiteLattice: site count must be a perfect dim-th power");
    const double h = dom.side / static_cast<double>(m);
    SiteLattice lat;
    lat.cell_volume = std::pow(h, dom.dim);
    lat.sites.reserve(static_cast<std::size_t>(n_sites));
    std::vector<int> idx(static_cast<std::size_t>(dom.dim), 0);
    for (int s = 0; s < n_sites; ++s) {
        Point x(static_cast<std::size_t>(dom.dim));
        int rem = s;
        for (int d = 0; d < dom.dim; ++d) {
            x[static_cast<std::size_t>(d)] = h * static_cast<double>(rem % m);
            rem /= m;
        }
        lat.sites.push_back(std::move(x));
    }
    return lat;
}

TruncatedSpace TruncatedSpace::enumerate(int M, int N) {
    if (N < 0 || M < N || M > 24)
        throw std::invalid_argument("TruncatedSpace: need 0 <= N <= M <= 24");
    double size = 0.0;
    for (int k = 0; k <= N; ++k) {
        size += std::exp(std::lgamma(M + 1.0) - std::lgamma(k + 1.0) -
                         std::lgamma(M - k + 1.0));
    }
    if (size > 1e7 + 0.5)
        throw std::invalid_argument("TruncatedSpace: truncation too large");

    TruncatedSpace sp;
    sp.M_ = M;
    sp.N_ = N;
    sp.masks_.reserve(static_cast<std::size_t>(size + 0.5));
    const std::uint32_t top = M == 32 ? 0xffffffffu : ((1u << M) - 1u);
    for (int k = 0; k <= N; ++k) {
        for (std::uint32_t m = 0; m <= top; ++m) {
            if (std::popcount(m) == k) sp.masks_.push_back(m);
        }
    }
    return sp;
}

std::size_t TruncatedSpace::index_of(std::uint32_t mask) const {
    const auto cmp = [](std::uint32_t a, std::uint32_t b) {
        const int pa = std::popcount(a), pb = std::popcount(b);
        return pa != pb ? pa < pb : a < b;
    };
    const auto it = std::lower_bound(masks_.begin(), masks_.end(), mask, cmp);
    if (it == masks_.end() || *it != mask)
        throw std::invalid_argument("TruncatedSpace: mask not in space");
    return static_cast<std::size_t>(it - masks_.begin());
}

int TruncatedSpace::popcount(std::size_t index) const {
    return std::popcount(masks_[index]);
}

Configuration TruncatedSpace::to_configuration(std::size_t index,
                                               const SiteLattice& lat) const {
    std::vector<Point> pts;
    const std::uint32_t m = masks_[index];
    for (int i = 0; i < M_; ++i)
        if (m & (1u << i)) pts.push_back(lat.sites[static_cast<std::size_t>(i)]);
    return Configuration(std::move(pts));
}

void EnvChain::validate() const {
    const std::size_t K = states.size();
    if (K == 0) throw std::invalid_argument("EnvChain: empty");
    if (rates.size() != K || mu.size() != K)
        throw std::invalid_argument("EnvChain: size mismatch");
    double mu_sum = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        if (rates[j].size() != K)
            throw std::invalid_argument("EnvChain: rate matrix not square");
        double row = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (j != k && rates[j][k] < 0.0)
                throw std::invalid_argument("EnvChain: negative rate");
            row += rates[j][k];
        }
        if (std::fabs(row) > 1e-10)
            throw std::invalid_argument("EnvChain: row sums must vanish");
        if (!(mu[j] > 0.0))
            throw std::invalid_argument("EnvChain: mu must be positive");
        mu_sum += mu[j];
    }
    if (std::fabs(mu_sum - 1.0) > 1e-10)
        throw std::invalid_argument("EnvChain: mu must sum to one");
    for (std::size_t k = 0; k < K; ++k) {
        double stat = 0.0;
        for (std::size_t j = 0; j < K; ++j) stat += mu[j] * rates[j][k];
        if (std::fabs(stat) > 1e-9)
            throw std::invalid_argument("EnvChain: mu is not invariant");
    }
    if (K > 1) {
        // irreducibility: everything reachable from 0, forwards and backwards
        for (int dir = 0; dir < 2; ++dir) {
            std::vector<bool> seen(K, false);
            std::vector<std::size_t> stack{0};
            seen[0] = true;
            while (!stack.empty()) {
                const std::size_t j = stack.back();
                stack.pop_back();
                for (std::size_t k = 0; k < K; ++k) {
                    const double r = dir == 0 ? rates[j][k] : rates[k][j];
                    if (k != j && r > 0.0 && !seen[k]) {
                        seen[k] = true;
                        stack.push_back(k);
                    }
                }
            }
            for (bool s : seen)
                if (!s) throw std::invalid_argument("EnvChain: not irreducible");
        }
    }
}

EnvChain EnvChain::two_state(double z, const Point& w) {
    if (!(z > 0.0)) throw std::invalid_argument("EnvChain::two_state: z <= 0");
    EnvChain c;
    c.states = {Configuration{}, Configuration({w})};
    c.rates = {{-z, z}, {1.0, -1.0}};
    c.mu = {1.0 / (1.0 + z), z / (1.0 + z)};
    c.validate();
    return c;
}

namespace {

Configuration spread_points(int n, const Domain& dom) {
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) {
        Point x(static_cast<std::size_t>(dom.dim), 0.0);
        x[0] = dom.side * (static_cast<double>(i) + 0.5) /
               static_cast<double>(n);
        pts.push_back(std::move(x));
    }
    return Configuration(std::move(pts));
}

}  // namespace

EnvChain EnvChain::two_state_sizes(int size_a, int size_b, const Domain& dom) {
    EnvChain c;
    c.states = {spread_points(size_a, dom), spread_points(size_b, dom)};
    c.rates = {{-1.0, 1.0}, {1.0, -1.0}};
    c.mu = {0.5, 0.5};
    c.validate();
    return c;
}

EnvChain EnvChain::two_state_mean(double mean, const Point& w) {
    if (!(mean > 0.0 && mean < 1.0))
        throw std::invalid_argument("EnvChain::two_state_mean: mean in (0,1)");
    const double up = mean / (1.0 - mean);
    EnvChain c;
    c.states = {Configuration{}, Configuration({w})};
    c.rates = {{-up, up}, {1.0, -1.0}};
    c.mu = {1.0 - mean, mean};
    c.validate();
    return c;
}

EnvChain EnvChain::resample_poisson(double z, int K, const Domain& dom) {
    if (K < 2) throw std::invalid_argument("EnvChain::resample_poisson: K < 2");
    const double mean = z * dom.volume();
    std::vector<double> pi(static_cast<std::size_t>(K));
    double norm = 0.0;
    for (int k = 0; k < K; ++k) {
        pi[static_cast<std::size_t>(k)] = poisson_pmf(k, mean);
        norm += pi[static_cast<std::size_t>(k)];
    }
    for (double& p : pi) p /= norm;
    EnvChain c;
    for (int k = 0; k < K; ++k) c.states.push_back(spread_points(k, dom));
    c.rates.assign(static_cast<std::size_t>(K),
                   std::vector<double>(static_cast<std::size_t>(K), 0.0));
    for (int j = 0; j < K; ++j) {
        for (int k = 0; k < K; ++k) {
            if (j == k) continue;
            c.rates[j][k] = pi[static_cast<std::size_t>(k)];
            c.rates[j][j] -= pi[static_cast<std::size_t>(k)];
        }
    }
    c.mu = pi;
    c.validate();
    return c;
}

double DensityVector::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

double DensityVector::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : values) m = std::min(m, v);
    return values.empty() ? 0.0 : m;
}

void DensityVector::validate(double tol) const {
    for (double v : values)
        if (v < -tol)
            throw std::invalid_argument("DensityVector: negative entry");
    if (mass() > 1.0 + tol)
        throw std::invalid_argument("DensityVector: mass exceeds one");
}

DensityVector DensityVector::point_mass(std::size_t dim, std::size_t index) {
    DensityVector rho;
    rho.values.assign(dim, 0.0);
    rho.values.at(index) = 1.0;
    return rho;
}

namespace {

// Per-state rate data shared by the three builders.
struct LatticeTables {
    std::vector<double> fec;              // lambda0 + sum_w psi(site - w)
    std::vector<double> death_env;        // m0 + sum_w kappa(site - w)
    std::vector<std::vector<double>> comp;    // a_minus between sites
    std::vector<std::vector<double>> disperse;  // a_plus(site_i - site_j) h^d
};

LatticeTables make_tables(const SiteLattice& lat, const Configuration& gamma,
                          const ModelParams& p, const Domain& dom) {
    const int M = lat.size();
    LatticeTables t;
    t.fec.resize(static_cast<std::size_t>(M));
    t.death_env.resize(static_cast<std::size_t>(M));
    t.comp.assign(static_cast<std::size_t>(M),
                  std::vector<double>(static_cast<std::size_t>(M), 0.0));
    t.disperse = t.comp;
    for (int i = 0; i < M; ++i) {
        const Point& x = lat.sites[static_cast<std::size_t>(i)];
        double kap = 0.0, ps = 0.0;
        for (const Point& w : gamma.points) {
            kap += eval_kernel(p.kappa, dom, x, w);
            ps += eval_kernel(p.psi, dom, x, w);
        }
        t.death_env[static_cast<std::size_t>(i)] = p.m0 + kap;
        t.fec[static_cast<std::size_t>(i)] = p.lambda0 + ps;
        for (int j = 0; j < M; ++j) {
            const Point& y = lat.sites[static_cast<std::size_t>(j)];
            t.comp[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                eval_kernel(p.a_minus, dom, x, y);
            t.disperse[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                eval_kernel(p.a_plus, dom, x, y) * lat.cell_volume;
        }
    }
    return t;
}

// Appends the damped off-diagonal transitions of state `s` to `out`,
// multiplying every rate by `scale` (used for mu-averaging).
void state_transitions(const TruncatedSpace& sp, const LatticeTables& t,
                       double delta, std::size_t s, double scale,
                       std::vector<Triplet>& out) {
    const std::uint32_t mask = sp.mask(s);
    const int M = sp.sites();
    const int n = std::popcount(mask);
    if (n == 0) return;

    // q of the model formula: deaths with competition plus total fecundity
    double q = 0.0;
    for (int i = 0; i < M; ++i) {
        if (!(mask & (1u << i))) continue;
        double death = t.death_env[static_cast<std::size_t>(i)];
        for (int j = 0; j < M; ++j)
            if (j != i && (mask & (1u << j)))
                death += t.comp[static_cast<std::size_t>(i)]
                               [static_cast<std::size_t>(j)];
        q += death + t.fec[static_cast<std::size_t>(i)];
    }
    const double damp = scale * std::exp(-delta * q);
    if (damp == 0.0) return;

    for (int i = 0; i < M; ++i) {
        if (!(mask & (1u << i))) continue;
        double death = t.death_env[static_cast<std::size_t>(i)];
        for (int j = 0; j < M; ++j)
            if (j != i && (mask & (1u << j)))
                death += t.comp[static_cast<std::size_t>(i)]
                               [static_cast<std::size_t>(j)];
        if (death > 0.0) {
            const std::size_t to = sp.index_of(mask & ~(1u << i));
            out.push_back(Triplet{static_cast<std::uint32_t>(s),
                                  static_cast<std::uint32_t>(to),
                                  death * damp});
        }
    }
    if (n >= sp.cap()) return;  // births beyond the cap are suppressed
    for (int y = 0; y < M; ++y) {
        if (mask & (1u << y)) continue;  // occupied target: suppressed
        double w = 0.0;
        for (int i = 0; i < M; ++i)
            if (mask & (1u << i))
                w += t.fec[static_cast<std::size_t>(i)] *
                     t.disperse[static_cast<std::size_t>(i)]
                               [static_cast<std::size_t>(y)];
        if (w > 0.0) {
            const std::size_t to = sp.index_of(mask | (1u << y));
            out.push_back(Triplet{static_cast<std::uint32_t>(s),
                                  static_cast<std::uint32_t>(to), w * damp});
        }
    }
}

}  // namespace

SparseGenerator build_system_generator(const TruncatedSpace& sp,
                                       const SiteLattice& lat,
                                       const Configuration& gamma,
                                       const ModelParams& p, const Domain& dom,
                                       double delta) {
    if (delta < 0.0)
        throw std::invalid_argument("build_system_generator: delta < 0");
    if (lat.size() != sp.sites())
        throw std::invalid_argument("build_system_generator: lattice mismatch");
    const LatticeTables t = make_tables(lat, gamma, p, dom);
    std::vector<Triplet> entries;
    for (std::size_t s = 0; s < sp.size(); ++s)
        state_transitions(sp, t, delta, s, 1.0, entries);
    return SparseGenerator::from_triplets(sp.size(), Orientation::rates,
                                          std::move(entries), true);
}

SparseGenerator build_joint_generator(const TruncatedSpace& sp,
                                      const SiteLattice& lat,
                                      const EnvChain& env,
                                      const ModelParams& p, const Domain& dom,
                                      double epsilon, double delta) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("build_joint_generator: epsilon must be > 0");
    if (delta < 0.0)
        throw std::invalid_argument("build_joint_generator: delta < 0");
    env.validate();
    const std::size_t S = sp.size();
    const std::size_t K = env.size();
    std::vector<Triplet> entries;
    // diagonal blocks: forward system dynamics at each frozen chain state
    for (std::size_t k = 0; k < K; ++k) {
        const LatticeTables t = make_tables(lat, env.states[k], p, dom);
        std::vector<Triplet> block;
        for (std::size_t s = 0; s < S; ++s)
            state_transitions(sp, t, delta, s, 1.0, block);
        for (const Triplet& tr : block) {
            // forward: column = source
            entries.push_back(
                Triplet{static_cast<std::uint32_t>(tr.col + S * k),
                        static_cast<std::uint32_t>(tr.row + S * k), tr.value});
        }
    }
    // environment switching at speed 1/epsilon, identical in the system slot
    for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t k = 0; k < K; ++k) {
            if (j == k || env.rates[j][k] == 0.0) continue;
            const double r = env.rates[j][k] / epsilon;
            for (std::size_t s = 0; s < S; ++s) {
                entries.push_back(
                    Triplet{static_cast<std::uint32_t>(s + S * k),
                            static_cast<std::uint32_t>(s + S * j), r});
            }
        }
    }
    return SparseGenerator::from_triplets(S * K, Orientation::forward,
                                          std::move(entries), true);
}

SparseGenerator build_averaged_generator(const TruncatedSpace& sp,
                                         const SiteLattice& lat,
                                         const EnvChain& env,
                                         const ModelParams& p,
                                         const Domain& dom, double delta) {
    if (delta < 0.0)
        throw std::invalid_argument("build_averaged_generator: delta < 0");
    env.validate();
    std::vector<Triplet> entries;
    for (std::size_t k = 0; k < env.size(); ++k) {
        const LatticeTables t = make_tables(lat, env.states[k], p, dom);
        for (std::size_t s = 0; s < sp.size(); ++s)
            state_transitions(sp, t, delta, s, env.mu[k], entries);
    }
    return SparseGenerator::from_triplets(sp.size(), Orientation::rates,
                                          std::move(entries), true);
}

namespace {

DensityVector evolve_uniformization(const DensityVector& rho0,
                                    const SparseGenerator& G, double t,
                                    double tol, Exec exec) {
    const std::size_t n = G.dim();
    const double rate = G.max_abs_diagonal();
    DensityVector out;
    out.values.assign(n, 0.0);
    if (rate * t == 0.0) {
        out.values = rho0.values;
        return out;
    }
    const double a = rate * t;
    const std::size_t k_max = static_cast<std::size_t>(
        a + 46.0 * std::sqrt(a + 10.0) + 200.0);

    // Precompute the Poisson weights and renormalize: for a*t ~ 1e6 the raw
    // pmf only sums to 1 +- 1e-9 in floating point, which would make tight
    // tail tolerances unreachable and pollute mass defects.
    std::vector<double> weights(k_max + 1);
    double wsum = 0.0, wsum_c = 0.0;
    const auto add = [](double& sum, double& c, double x) {
        const double s = sum + x;
        if (std::fabs(sum) >= std::fabs(x))
            c += (sum - s) + x;
        else
            c += (x - s) + sum;
        sum = s;
    };
    for (std::size_t k = 0; k <= k_max; ++k) {
        weights[k] = poisson_pmf(static_cast<int>(k), a);
        add(wsum, wsum_c, weights[k]);
    }
    const double norm = wsum + wsum_c;
    std::size_t k_stop = k_max;
    {
        double tail = 0.0, tail_c = 0.0;
        std::size_t k = k_max;
        while (k > 0 && tail + tail_c + weights[k] <= 0.5 * tol * norm) {
            add(tail, tail_c, weights[k]);
            --k;
        }
        k_stop = k;
    }
    if (k_stop == k_max && a > 100.0)
        throw std::runtime_error(
            "evolve: uniformization tolerance not reached, residual " +
            std::to_string(weights[k_max] / norm));

    std::vector<double> v = rho0.values;
    std::vector<double> gv(n, 0.0);
    std::vector<double> comp(n, 0.0);
    for (std::size_t k = 0; k <= k_stop; ++k) {
        if (k > 0) {
            G.apply(std::span<const double>(v), std::span<double>(gv), exec);
            for (std::size_t i = 0; i < n; ++i) v[i] += gv[i] / rate;
        }
        const double w = weights[k] / norm;
        if (w > 0.0)
            for (std::size_t i = 0; i < n; ++i)
                add(out.values[i], comp[i], w * v[i]);
    }
    for (std::size_t i = 0; i < n; ++i) out.values[i] += comp[i];
    return out;
}

// Dormand-Prince 5(4) with L1 error control.
DensityVector evolve_rk(const DensityVector& rho0, const SparseGenerator& G,
                        double t, double tol, Exec exec) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                            c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113,
                            b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600,
                            e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640,
                            e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100,
                            e7 = -1.0 / 40;
    (void)c2; (void)c3; (void)c4; (void)c5;

    const std::size_t n = G.dim();
    std::vector<double> y = rho0.values;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n),
        tmp(n), y5(n);
    const auto f = [&](const std::vector<double>& in, std::vector<double>& out) {
        G.apply(std::span<const double>(in), std::span<double>(out), exec);
    };

    double s = 0.0;
    const double rate = std::max(G.max_abs_diagonal(), 1e-300);
    double h = std::min(t, 0.1 / rate);
    std::size_t iterations = 0;
    const std::size_t max_iterations = 20000000;
    while (s < t) {
        if (++iterations > max_iterations)
            throw std::runtime_error("evolve: rk_adaptive iteration cap reached");
        h = std::min(h, t - s);
        f(y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        f(tmp, k2);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(tmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] +
                                 a54 * k4[i]);
        f(tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                 a64 * k4[i] + a65 * k5[i]);
        f(tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                                b5 * k5[i] + b6 * k6[i]);
        f(y5, k7);
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err += std::fabs(h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                  e5 * k5[i] + e6 * k6[i] + e7 * k7[i]));
            norm += std::fabs(y5[i]);
        }
        const double tol_step = tol * std::max(1.0, norm) * std::max(h / t, 1e-12);
        if (err <= tol_step) {
            y.swap(y5);
            s += h;
        }
        const double factor =
            err > 0.0 ? 0.9 * std::pow(tol_step / err, 0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
    }
    DensityVector out;
    out.values = std::move(y);
    return out;
}

}  // namespace

DensityVector evolve(const DensityVector& rho0, const SparseGenerator& G,
                     double t, EvolveMethod method, double tol, Exec exec) {
    if (rho0.values.size() != G.dim())
        throw std::invalid_argument("evolve: dimension mismatch");
    if (t < 0.0) throw std::invalid_argument("evolve: negative time");
    if (!(tol > 0.0)) throw std::invalid_argument("evolve: tol must be > 0");
    if (t == 0.0) return rho0;
    return method == EvolveMethod::uniformization
               ? evolve_uniformization(rho0, G, t, tol, exec)
               : evolve_rk(rho0, G, t, tol, exec);
}

namespace {

void check_grid(const std::vector<double>& t_grid) {
    if (t_grid.empty()) throw std::invalid_argument("empty time grid");
    double prev = -1.0;
    for (double t : t_grid) {
        if (t < 0.0 || t <= prev)
            throw std::invalid_argument("time grid must be increasing and >= 0");
        prev = t;
    }
}

// Cumulative evolution along a grid; returns the density at every grid time.
std::vector<DensityVector> evolve_grid(const DensityVector& rho0,
                                       const SparseGenerator& G_fwd,
                                       const std::vector<double>& t_grid,
                                       double tol, Exec exec) {
    std::vector<DensityVector> out;
    out.reserve(t_grid.size());
    DensityVector cur = rho0;
    double t_prev = 0.0;
    for (double t : t_grid) {
        cur = evolve(cur, G_fwd, t - t_prev, EvolveMethod::uniformization, tol,
                     exec);
        t_prev = t;
        out.push_back(cur);
    }
    return out;
}

}  // namespace

SweepTable averaging_error(const TruncatedSpace& sp, const SiteLattice& lat,
                           const EnvChain& env, const ModelParams& p,
                           const Domain& dom,
                           const std::vector<double>& eps_list, double delta,
                           const std::vector<double>& t_grid,
                           const DensityVector& rho0, double tol, Exec exec) {
    check_grid(t_grid);
    if (rho0.values.size() != sp.size())
        throw std::invalid_argument("averaging_error: rho0 dimension mismatch");

    const std::size_t S = sp.size();
    const std::size_t K = env.size();
    const SparseGenerator G_avg =
        build_averaged_generator(sp, lat, env, p, dom, delta).transposed();
    const auto rho_bar = evolve_grid(rho0, G_avg, t_grid, tol, exec);

    SweepTable table;
    for (double eps : eps_list) {
        const SparseGenerator G_joint =
            build_joint_generator(sp, lat, env, p, dom, eps, delta);
        DensityVector joint0;
        joint0.values.assign(S * K, 0.0);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t s = 0; s < S; ++s)
                joint0.values[s + S * k] = rho0.values[s] * env.mu[k];
        const auto joint = evolve_grid(joint0, G_joint, t_grid, tol, exec);

        double sup = 0.0;
        for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
            double err = 0.0, tv = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                double marginal = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    const double pj = joint[ti].values[s + S * k];
                    err += std::fabs(pj - rho_bar[ti].values[s] * env.mu[k]);
                    marginal += pj;
                }
                tv += std::fabs(marginal - rho_bar[ti].values[s]);
            }
            sup = std::max(sup, err);
            table.rows.push_back(SweepRow{eps, t_grid[ti], err, tv});
        }
        table.sup_error[eps] = sup;
    }
    return table;
}

SweepTable delta_error(const TruncatedSpace& sp, const SiteLattice& lat,
                       const EnvChain& env, const ModelParams& p,
                       const Domain& dom, const std::vector<double>& delta_list,
                       const std::vector<double>& t_grid,
                       const DensityVector& rho0, double tol, Exec exec) {
    check_grid(t_grid);
    if (rho0.values.size() != sp.size())
        throw std::invalid_argument("delta_error: rho0 dimension mismatch");

    const SparseGenerator G0 =
        build_averaged_generator(sp, lat, env, p, dom, 0.0).transposed();
    const auto base = evolve_grid(rho0, G0, t_grid, tol, exec);

    SweepTable table;
    for (double delta : delta_list) {
        const SparseGenerator Gd =
            build_averaged_generator(sp, lat, env, p, dom, delta).transposed();
        const auto damped = evolve_grid(rho0, Gd, t_grid, tol, exec);
        double sup = 0.0;
        for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
            double err = 0.0;
            for (std::size_t s = 0; s < sp.size(); ++s)
                err += std::fabs(damped[ti].values[s] - base[ti].values[s]);
            sup = std::max(sup, err);
            table.rows.push_back(SweepRow{delta, t_grid[ti], err, err});
        }
        table.sup_error[delta] = sup;
    }
    return table;
}

NormCheckReport operator_norm_check(const SparseGenerator& G_fwd, double delta) {
    if (G_fwd.orientation() != Orientation::forward)
        throw std::invalid_argument(
            "operator_norm_check: generator must be in forward form");
    if (!(delta > 0.0))
        throw std::invalid_argument("operator_norm_check: bound vacuous (delta = 0)");
    NormCheckReport rep;
    rep.norm = G_fwd.l1_operator_norm();
    rep.bound = 2.0 / (std::numbers::e * delta);
    rep.pass = rep.norm <= rep.bound + 1e-12;
    return rep;
}

MomentBoundReport moment_bound_check(const TruncatedSpace& sp,
                                     const SiteLattice& lat,
                                     const EnvChain& env, const ModelParams& p,
                                     const Domain& dom,
                                     const DensityVector& rho0,
                                     const std::vector<double>& t_grid,
                                     double tol) {
    check_grid(t_grid);
    if (rho0.values.size() != sp.size())
        throw std::invalid_argument("moment_bound_check: rho0 dimension mismatch");
    if (kernel_mass(p.a_minus, dom.dim) < 0.0)
        throw std::invalid_argument("moment_bound_check: a_minus must be bounded");

    MomentBoundReport rep;
    rep.beta = beta(p, dom.dim);

    const auto first_moment = [&](const DensityVector& rho) {
        double m = 0.0;
        for (std::size_t s = 0; s < sp.size(); ++s)
            m += static_cast<double>(sp.popcount(s)) * rho.values[s];
        return m;
    };
    const auto boundary_mass = [&](const DensityVector& rho) {
        double m = 0.0;
        for (std::size_t s = 0; s < sp.size(); ++s)
            if (sp.popcount(s) >= sp.cap() - 1) m += rho.values[s];
        return m;
    };

    const double moment0 = first_moment(rho0);
    const SparseGenerator G =
        build_averaged_generator(sp, lat, env, p, dom, 0.0).transposed();
    const double evolve_tol = std::min(1e-12, 1e-4 * tol);
    const auto rhos = evolve_grid(rho0, G, t_grid, evolve_tol, Exec::serial);

    rep.holds = true;
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
        MomentBoundRow row;
        row.t = t_grid[ti];
        row.moment = first_moment(rhos[ti]);
        row.bound = std::exp(rep.beta * row.t) * moment0;
        row.boundary_mass = boundary_mass(rhos[ti]);
        row.ok = row.moment <= row.bound + tol;
        if (!row.ok) rep.holds = false;
        if (row.boundary_mass >= 1e-6) rep.truncation_limited = true;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace ips
