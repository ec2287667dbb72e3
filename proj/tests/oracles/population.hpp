#pragma once

#include <functional>
#include <span>
#include <vector>

#include "expfam/score_matching.hpp"
#include "expfam/structure_recovery.hpp"
#include "oracles/quadrature.hpp"

namespace oracle {

/// Population local quadratic of a model at vertex i by tensor Simpson
/// quadrature on [-R, R]^n:
///   H = E[d_i f_a d_i f_b], b = E[d_i^2 f_a + d_i log h d_i f_a],
///   c0 = E[d_i^2 log h + 1/2 (d_i log h)^2].
inline expfam::LocalQuadratic population_quadratic(const expfam::Model& model, int i, std::span<const int> kept,
                                                    double R, int intervals) {
  const auto& fam = model.family();
  const auto active = expfam::active_factors(fam, i, kept);
  const auto k = static_cast<Eigen::Index>(active.size());
  using G = std::function<double(const std::vector<double>&)>;
  std::vector<G> gs;
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index c = 0; c <= a; ++c) {
      const auto& fa = fam.factor(active[static_cast<std::size_t>(a)]);
      const auto& fc = fam.factor(active[static_cast<std::size_t>(c)]);
      gs.push_back([&fa, &fc, i](const std::vector<double>& x) {
        return expfam::partial_derivative(fa, i, 1, x) * expfam::partial_derivative(fc, i, 1, x);
      });
    }
  }
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto& fa = fam.factor(active[static_cast<std::size_t>(a)]);
    gs.push_back([&fa, &fam, i](const std::vector<double>& x) {
      return expfam::partial_derivative(fa, i, 2, x) +
             fam.log_base_derivative(i, 1, x) * expfam::partial_derivative(fa, i, 1, x);
    });
  }
  gs.push_back([&fam, i](const std::vector<double>& x) {
    const double d1 = fam.log_base_derivative(i, 1, x);
    return fam.log_base_derivative(i, 2, x) + 0.5 * d1 * d1;
  });
  const auto ex = tensor_expectations(
      fam.n(), simpson_rule(-R, R, intervals),
      [&](const std::vector<double>& x) { return model.log_density_unnormalized(x); }, gs);

  expfam::LocalQuadratic q;
  q.vertex = i;
  q.active = active;
  q.H = Eigen::MatrixXd(k, k);
  std::size_t g = 0;
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index c = 0; c <= a; ++c) q.H(a, c) = q.H(c, a) = ex[g++];
  }
  q.b = Eigen::VectorXd(k);
  for (Eigen::Index a = 0; a < k; ++a) q.b[a] = ex[g++];
  q.c0 = ex[g];
  q.num_samples = 0;
  return q;
}

inline expfam::QuadraticSource population_source(const expfam::Model& model, double R, int intervals) {
  return [&model, R, intervals](int i, std::span<const int> kept) {
    return population_quadratic(model, i, kept, R, intervals);
  };
}

}  // namespace oracle
