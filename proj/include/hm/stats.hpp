#pragma once

#include <span>
#include <utility>
#include <vector>

namespace hm {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(std::span<const double> xs);

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double n_effective = 0.0;
};
KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys);

/// Weighted variant: weights act as fractional counts, the p-value uses the
/// effective sample size (sum w)^2 / sum w^2 of each side.
KsResult ks_two_sample_weighted(std::span<const double> xs, std::span<const double> wx,
                                std::span<const double> ys, std::span<const double> wy);

double ks_asymptotic_p(double d, double n_effective);

/// Weighted quantile (weights need not be normalized).
double weighted_quantile(std::span<const double> xs, std::span<const double> ws, double q);

/// Weighted least squares y ~ a + b x; returns intercept a with its SE.
struct LineFit {
    double intercept = 0.0, slope = 0.0;
    double intercept_se = 0.0, slope_se = 0.0;
};
LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                          std::span<const double> se);

/// Ordinary least squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// log(sum exp(a_i)) guarded against empty input and -inf entries.
double log_sum_exp(std::span<const double> a);

/// Mean of exp(a_i) in log space with a relative standard error.
struct LogMeanExp {
    double log_mean;
    double rel_se; // se / mean
};
LogMeanExp log_mean_exp(std::span<const double> a);

/// Gaussian density n_s(z) with variance s.
double gaussian_density(double s, double z);

} // namespace hm
