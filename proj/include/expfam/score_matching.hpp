#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "expfam/family.hpp"
#include "expfam/sampler.hpp"

namespace expfam {

/// Empirical local score-matching loss at vertex i written as an exact
/// quadratic in the active parameters:
///   L_i(theta) = c0 + b^T theta + 1/2 theta^T H theta.
struct LocalQuadratic {
  int vertex = 0;
  std::vector<int> active;  // family factor indices, ascending
  Eigen::MatrixXd H;
  Eigen::VectorXd b;
  double c0 = 0.0;
  int num_samples = 0;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(active.size()); }
  double value(const Eigen::VectorXd& theta) const;
};

/// d^2/dx_i^2 log p + 1/2 (d/dx_i log p)^2 at one point; theta is sized to
/// the whole family.
double local_loss(const Family& family, std::span<const double> theta, int i, std::span<const double> x);

/// Quadratic on K_i, or on K_i ∩ kept when `kept` is non-empty. Rows are
/// accumulated in fixed-size blocks across threads and merged in block order,
/// so the result does not depend on the thread count.
LocalQuadratic assemble_quadratic(const Family& family, int i, const SampleBatch& batch,
                                  std::span<const int> kept = {});

/// Single-pass reference accumulation in row order.
LocalQuadratic assemble_quadratic_serial(const Family& family, int i, const SampleBatch& batch,
                                         std::span<const int> kept = {});

/// Active factor list for vertex i: K_i, optionally intersected with kept.
std::vector<int> active_factors(const Family& family, int i, std::span<const int> kept = {});

struct ValueGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

ValueGrad quad_value_grad(const LocalQuadratic& quad, const Eigen::VectorXd& theta);

/// 1/2 delta^T H delta.
double excess_loss(const LocalQuadratic& quad, const Eigen::VectorXd& delta);

/// E_i(x, delta) = sum_k delta_k d/dx_i f_k(x) over the listed factors.
double score_error_field(const Family& family, int i, std::span<const int> factors, const Eigen::VectorXd& delta,
                         std::span<const double> x);

/// Restriction of a family-sized vector to the active factors.
Eigen::VectorXd restrict_to(std::span<const int> active, std::span<const double> full);

nlohmann::json to_json(const LocalQuadratic& quad);
LocalQuadratic quadratic_from_json(const nlohmann::json& j);

}  // namespace expfam
