#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ipsavg/rng.hpp"

namespace ips {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> xs);

double poisson_pmf(int k, double mean);  // log-space, safe for large means

/// Upper-tail p-value of a chi-squared statistic.
double chi_squared_p_value(double stat, int df);

struct Chi2Result {
    double stat = 0.0;
    int df = 0;
    double p_value = 0.0;
};

/// Goodness-of-fit against given cell probabilities. Adjacent cells are
/// pooled (from the right) until every expected count is at least
/// min_expected; any residual probability mass is folded into the last cell.
Chi2Result chi2_gof(const std::vector<std::size_t>& observed,
                    const std::vector<double>& probs,
                    double min_expected = 5.0);

/// Two-sample Kolmogorov-Smirnov statistic (copies are sorted internally).
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Critical value of the two-sample KS statistic at significance alpha.
double ks_critical(double alpha, std::size_t n, std::size_t m);

/// Wasserstein-1 distance between empirical distributions.
double wasserstein1(std::vector<double> a, std::vector<double> b);

struct BootstrapCi {
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap CI of a two-sample statistic.
BootstrapCi bootstrap_ci_two_sample(
    double (*metric)(std::vector<double>, std::vector<double>),
    const std::vector<double>& a, const std::vector<double>& b,
    int n_resamples, Rng& rng, double level = 0.95);

/// OLS slope of y against x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// Two-sided Student-t quantile helper for batch-means intervals.
double student_t_quantile(double two_sided_level, int df);

}  // namespace ips
