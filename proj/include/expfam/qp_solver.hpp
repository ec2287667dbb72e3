#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "expfam/family.hpp"
#include "expfam/score_matching.hpp"

namespace expfam {

/// sum_{k in members} |theta_k| <= B for every group. Members are positions in
/// the active parameter vector.
struct GroupL1Constraints {
  struct Group {
    int variable = 0;
    std::vector<int> members;
  };
  std::vector<Group> groups;
  double B = 1.0;

  /// max_j (group norm - B); <= 0 when feasible.
  double max_violation(const Eigen::VectorXd& theta) const;
};

/// One group per variable j whose K_j meets the active set, restricted to it.
GroupL1Constraints local_constraints(const Family& family, std::span<const int> active, double B);

/// Euclidean projection onto {u : |u|_1 <= bound}.
Eigen::VectorXd project_l1(const Eigen::VectorXd& v, double bound);

/// Dykstra's alternating projections onto the intersection of the group
/// balls. Throws std::runtime_error if the iterate is still infeasible by more
/// than tol after max_iter sweeps.
Eigen::VectorXd project_intersection(const Eigen::VectorXd& v, const GroupL1Constraints& constraints,
                                     double tol = 1e-13, int max_iter = 100000);

struct SolverOptions {
  double tol = 0.0;        // 0 selects tol_scale * 1e-8 (1 + |c0|)
  double tol_scale = 1.0;
  int max_iter = 0;        // 0 selects 50 |active|
  bool certify = true;     // run the tol/100 reference solve for eta_bound
};

struct SolveResult {
  Eigen::VectorXd theta_hat;
  double value = 0.0;
  double eta_bound = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient descent from 0 with step 1/L, L = 1.01 lambda_max(H).
/// Stops when |theta - P(theta - grad/L)|_2 <= tol. eta_bound is
/// value(theta_hat) - value(theta_ref) clamped at 0, where theta_ref is a
/// warm-started run at tol/100 with ten times the iteration budget.
/// Throws std::invalid_argument when H has an eigenvalue below -1e-9 |H|.
SolveResult solve(const LocalQuadratic& quad, const GroupL1Constraints& constraints,
                  const SolverOptions& options = {});

nlohmann::json to_json(const SolveResult& result);

}  // namespace expfam
