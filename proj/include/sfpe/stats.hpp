#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sfpe {

double mean(std::span<const double> x);

/// Population variance (divide by n).
double variance(std::span<const double> x);

/// Sample standard deviation (divide by n-1); 0 for n < 2.
double sd_sample(std::span<const double> x);

/// Quantile of a sorted sample, linear interpolation between order stats.
double quantile_sorted(std::span<const double> sorted, double q);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::int64_t n = 0;
};

/// Least-squares line through (x_i, y_i).
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Wilson score lower confidence bound for a binomial proportion.
double wilson_lower(std::int64_t successes, std::int64_t n, double z);

/// Two-sample Kolmogorov-Smirnov statistic; inputs must be sorted.
double ks_statistic(std::span<const double> a, std::span<const double> b);

double digamma(double x);

/// H_n = 1 + 1/2 + ... + 1/n.
double harmonic(std::int64_t n);

}  // namespace sfpe
