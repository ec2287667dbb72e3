#include "expfam/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace expfam {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty series");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  double ss = 0.0;
  for (double v : xs) ss += (v - mu) * (v - mu);
  return ss / static_cast<double>(xs.size() - 1);
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of empty series");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double batch_means_stderr(std::span<const double> series, int num_batches) {
  const std::size_t n = series.size();
  if (num_batches < 2 || n < static_cast<std::size_t>(2 * num_batches)) {
    return std::sqrt(sample_variance(series) / static_cast<double>(n));
  }
  const std::size_t len = n / static_cast<std::size_t>(num_batches);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(num_batches));
  for (int b = 0; b < num_batches; ++b) {
    means.push_back(mean(series.subspan(static_cast<std::size_t>(b) * len, len)));
  }
  return std::sqrt(sample_variance(means) / num_batches);
}

double effective_sample_size(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 4) return static_cast<double>(n);
  const double mu = mean(series);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mu) * (v - mu);
  c0 /= static_cast<double>(n);
  if (c0 <= 0) return static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (series[t] - mu) * (series[t + lag] - mu);
    return s / static_cast<double>(n);
  };
  // Geyer: sum consecutive pairs while they stay positive.
  double tau = -1.0;
  const std::size_t max_lag = std::min<std::size_t>(n - 1, 2000);
  for (std::size_t lag = 0; lag + 1 < max_lag; lag += 2) {
    const double pair = (autocov(lag) + autocov(lag + 1)) / c0;
    if (pair <= 0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau;
}

Interval95 wilson_interval(int successes, int trials) {
  if (trials <= 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  const double nn = trials;
  const double p = successes / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("slope fit needs paired data");
  if (x.size() < 2) throw std::invalid_argument("slope fit needs at least two points");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (!(x[t] > 0) || !(y[t] > 0)) throw std::invalid_argument("slope fit needs positive data");
    lx.push_back(std::log(x[t]));
    ly.push_back(std::log(y[t]));
  }
  const double mx = mean(lx);
  const double my = mean(ly);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t t = 0; t < lx.size(); ++t) {
    sxy += (lx[t] - mx) * (ly[t] - my);
    sxx += (lx[t] - mx) * (lx[t] - mx);
  }
  if (sxx == 0) throw std::invalid_argument("slope fit needs distinct x values");
  return sxy / sxx;
}

}  // namespace expfam
