#pragma once

#include <cstddef>
#include <span>

// Ensemble statistics. Every reduction here walks the samples in index order
// with pairwise summation, so a fixed sample vector always gives the same bits
// no matter how the samples were produced.
namespace cbesq::stats {

double pairwise_sum(std::span<const double> x);
double mean(std::span<const double> x);
/// Unbiased sample variance.
double variance(std::span<const double> x);
/// Standard error of the mean.
double stderr_mean(std::span<const double> x);

struct Estimate {
    double value = 0.0;
    double stderr = 0.0;
};

/// Sample covariance with the standard error of the product-moment estimator.
Estimate covariance(std::span<const double> x, std::span<const double> y);
/// Sample variance with its large-sample standard error.
Estimate variance_estimate(std::span<const double> x);

/// Empirical quantile (linear interpolation between order statistics), q in [0, 1].
double quantile(std::span<const double> x, double q);

/// One-sided 95% Clopper-Pearson upper bound for a binomial rate with zero hits.
double clopper_pearson_zero_upper(std::size_t n, double confidence = 0.95);

/// log(sum(exp(x))) computed stably; -inf for an empty input.
double log_sum_exp(std::span<const double> x);

}  // namespace cbesq::stats
