#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Composite Simpson rule with an even number of intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int k = 1; k < intervals; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

/// Simpson weights and nodes on [a, b].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Rule simpson_rule(double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  Rule r;
  const double h = (b - a) / intervals;
  for (int k = 0; k <= intervals; ++k) {
    r.nodes.push_back(a + k * h);
    const double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    r.weights.push_back(w * h / 3.0);
  }
  return r;
}

/// Expectations under a density proportional to exp(log_density) on a
/// tensor grid: E[g] for each g, normalized by the same rule.
inline std::vector<double> tensor_expectations(int dim, const Rule& rule,
                                               const std::function<double(const std::vector<double>&)>& log_density,
                                               const std::vector<std::function<double(const std::vector<double>&)>>& gs) {
  const int m = static_cast<int>(rule.nodes.size());
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  std::vector<double> x(static_cast<std::size_t>(dim));
  // first pass for the log-density maximum
  double top = -INFINITY;
  for (;;) {
    for (int a = 0; a < dim; ++a) x[a] = rule.nodes[idx[a]];
    top = std::max(top, log_density(x));
    int a = 0;
    while (a < dim && ++idx[a] == m) idx[a++] = 0;
    if (a == dim) break;
  }
  double z = 0.0;
  std::vector<double> acc(gs.size(), 0.0);
  for (;;) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      x[a] = rule.nodes[idx[a]];
      w *= rule.weights[idx[a]];
    }
    const double p = w * std::exp(log_density(x) - top);
    z += p;
    for (std::size_t g = 0; g < gs.size(); ++g) acc[g] += p * gs[g](x);
    int a = 0;
    while (a < dim && ++idx[a] == m) idx[a++] = 0;
    if (a == dim) break;
  }
  for (double& v : acc) v /= z;
  return acc;
}

}  // namespace oracle
