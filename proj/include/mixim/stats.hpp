#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mixim::stats {

struct KsResult {
  double statistic;
  double p_value;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_sf(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the small-sample lambda correction.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// One-sample test against a continuous CDF.
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

double mean(std::span<const double> v);
/// Unbiased sample variance.
double variance(std::span<const double> v);

/// Linearly interpolated empirical quantile (the usual "type 7" rule).
double quantile(std::vector<double> v, double prob);
double quantile_sorted(std::span<const double> sorted, double prob);

/// Standard error of the mean of a correlated series by non-overlapping batch means.
double batch_means_se(std::span<const double> v, int batches = 50);

}  // namespace mixim::stats
