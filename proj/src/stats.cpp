#include "ipsavg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace ips {

MeanSe mean_se(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean_se: empty sample");
    MeanSe out;
    out.n = xs.size();
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(out.n);
    if (out.n == 1) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double var = ss / static_cast<double>(out.n - 1);
    out.se = std::sqrt(var / static_cast<double>(out.n));
    return out;
}

double poisson_pmf(int k, double mean) {
    if (k < 0) return 0.0;
    if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(static_cast<double>(k) * std::log(mean) - mean -
                    std::lgamma(static_cast<double>(k) + 1.0));
}

double chi_squared_p_value(double stat, int df) {
    if (df < 1) throw std::invalid_argument("chi_squared_p_value: df < 1");
    boost::math::chi_squared dist(static_cast<double>(df));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

Chi2Result chi2_gof(const std::vector<std::size_t>& observed,
                    const std::vector<double>& probs, double min_expected) {
    if (observed.size() != probs.size())
        throw std::invalid_argument("chi2_gof: size mismatch");
    std::size_t n = 0;
    for (auto c : observed) n += c;
    if (n == 0) throw std::invalid_argument("chi2_gof: empty sample");

    // Fold any probability mass missing from the cells into the last cell,
    // then pool adjacent cells until every group clears the expected floor;
    // a short remainder joins the final group.
    std::vector<double> exp_counts;
    std::vector<double> obs_counts;
    double total_p = 0.0;
    for (double p : probs) total_p += p;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = probs[i];
        if (i + 1 == probs.size()) p += std::max(0.0, 1.0 - total_p);
        exp_counts.push_back(p * static_cast<double>(n));
        obs_counts.push_back(static_cast<double>(observed[i]));
    }
    std::vector<double> e_pooled, o_pooled;
    double e_acc = 0.0, o_acc = 0.0;
    for (std::size_t i = 0; i < exp_counts.size(); ++i) {
        e_acc += exp_counts[i];
        o_acc += obs_counts[i];
        if (e_acc >= min_expected) {
            e_pooled.push_back(e_acc);
            o_pooled.push_back(o_acc);
            e_acc = o_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (e_pooled.empty()) {
            e_pooled.push_back(e_acc);
            o_pooled.push_back(o_acc);
        } else {
            e_pooled.back() += e_acc;
            o_pooled.back() += o_acc;
        }
    }
    if (e_pooled.size() < 2)
        throw std::invalid_argument("chi2_gof: fewer than two cells after pooling");

    Chi2Result res;
    for (std::size_t i = 0; i < e_pooled.size(); ++i) {
        const double d = o_pooled[i] - e_pooled[i];
        res.stat += d * d / e_pooled[i];
    }
    res.df = static_cast<int>(e_pooled.size()) - 1;
    res.p_value = chi_squared_p_value(res.stat, res.df);
    return res;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na -
                                  static_cast<double>(j) / nb));
    }
    return d;
}

double ks_critical(double alpha, std::size_t n, std::size_t m) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(n + m) /
                         (static_cast<double>(n) * static_cast<double>(m)));
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("wasserstein1: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
        return s / static_cast<double>(a.size());
    }
    // integral of |F_a - F_b| over the merged support
    std::vector<double> all;
    all.reserve(a.size() + b.size());
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    double s = 0.0;
    std::size_t i = 0, j = 0;
    for (std::size_t k = 0; k + 1 < all.size(); ++k) {
        while (i < a.size() && a[i] <= all[k]) ++i;
        while (j < b.size() && b[j] <= all[k]) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        s += std::fabs(fa - fb) * (all[k + 1] - all[k]);
    }
    return s;
}

BootstrapCi bootstrap_ci_two_sample(
    double (*metric)(std::vector<double>, std::vector<double>),
    const std::vector<double>& a, const std::vector<double>& b,
    int n_resamples, Rng& rng, double level) {
    if (n_resamples < 10)
        throw std::invalid_argument("bootstrap_ci_two_sample: need >= 10 resamples");
    std::vector<double> stats(static_cast<std::size_t>(n_resamples));
    std::vector<double> ra(a.size()), rb(b.size());
    for (int r = 0; r < n_resamples; ++r) {
        for (auto& x : ra) x = a[rng.uniform_index(a.size())];
        for (auto& x : rb) x = b[rng.uniform_index(b.size())];
        stats[static_cast<std::size_t>(r)] = metric(ra, rb);
    }
    std::sort(stats.begin(), stats.end());
    const double tail = 0.5 * (1.0 - level);
    const auto idx = [&](double p) {
        const double k = p * static_cast<double>(stats.size() - 1);
        return stats[static_cast<std::size_t>(std::llround(k))];
    };
    return BootstrapCi{idx(tail), idx(1.0 - tail)};
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols_slope: bad input");
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double student_t_quantile(double two_sided_level, int df) {
    if (df < 1) throw std::invalid_argument("student_t_quantile: df < 1");
    boost::math::students_t dist(static_cast<double>(df));
    return boost::math::quantile(dist, 0.5 * (1.0 + two_sided_level));
}

}  // namespace ips
