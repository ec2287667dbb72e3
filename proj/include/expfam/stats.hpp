#pragma once

#include <span>

namespace expfam {

double mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);
double median(std::span<const double> xs);

/// Standard error of the mean from non-overlapping batch means; suitable for
/// autocorrelated MCMC output.
double batch_means_stderr(std::span<const double> series, int num_batches = 50);

/// Effective sample size from the initial positive sequence of autocorrelations.
double effective_sample_size(std::span<const double> series);

struct Interval95 {
  double lo = 0;
  double hi = 0;
};
Interval95 wilson_interval(int successes, int trials);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(std::span<const double> x, std::span<const double> y);

}  // namespace expfam
