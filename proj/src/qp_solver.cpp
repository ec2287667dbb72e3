#include "expfam/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace expfam {

namespace {

double group_norm(const Eigen::VectorXd& v, const std::vector<int>& members) {
  double s = 0.0;
  for (int a : members) s += std::abs(v[a]);
  return s;
}

// Projects the members of one group onto the l1 ball in place.
void project_group(Eigen::VectorXd& v, const std::vector<int>& members, double bound) {
  Eigen::VectorXd sub(static_cast<Eigen::Index>(members.size()));
  for (std::size_t a = 0; a < members.size(); ++a) sub[static_cast<Eigen::Index>(a)] = v[members[a]];
  sub = project_l1(sub, bound);
  for (std::size_t a = 0; a < members.size(); ++a) v[members[a]] = sub[static_cast<Eigen::Index>(a)];
}

// Scales toward 0 until every group is within the bound; the feasible set is
// convex and contains 0.
void polish(Eigen::VectorXd& v, const GroupL1Constraints& c) {
  double worst = 0.0;
  for (const auto& g : c.groups) worst = std::max(worst, group_norm(v, g.members));
  if (worst > c.B) v *= c.B / worst;
}

struct Run {
  Eigen::VectorXd theta;
  int iterations = 0;
  bool converged = false;
};

Run descend(const LocalQuadratic& q, const GroupL1Constraints& c, double L, Eigen::VectorXd theta, double tol,
            int max_iter) {
  Run run;
  const double proj_tol = 1e-14 * std::max(1.0, c.B);
  for (int t = 0; t < max_iter; ++t) {
    const Eigen::VectorXd grad = q.b + q.H * theta;
    Eigen::VectorXd next = project_intersection(theta - grad / L, c, proj_tol);
    polish(next, c);
    const double residual = (next - theta).norm();
    run.iterations = t + 1;
    const bool uphill = q.value(next) > q.value(theta);  // only from rounding
    if (!uphill) theta = std::move(next);
    if (residual <= tol) {
      run.converged = true;
      break;
    }
    if (uphill) break;
  }
  run.theta = std::move(theta);
  return run;
}

}  // namespace

double GroupL1Constraints::max_violation(const Eigen::VectorXd& theta) const {
  double worst = -B;
  for (const auto& g : groups) worst = std::max(worst, group_norm(theta, g.members) - B);
  return worst;
}

GroupL1Constraints local_constraints(const Family& family, std::span<const int> active, double B) {
  if (!(B > 0)) throw std::invalid_argument("bound B must be positive");
  GroupL1Constraints c;
  c.B = B;
  for (int j = 0; j < family.n(); ++j) {
    GroupL1Constraints::Group g;
    g.variable = j;
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (family.factor(active[a]).contains(j)) g.members.push_back(static_cast<int>(a));
    }
    if (!g.members.empty()) c.groups.push_back(std::move(g));
  }
  return c;
}

Eigen::VectorXd project_l1(const Eigen::VectorXd& v, double bound) {
  if (!(bound > 0)) throw std::invalid_argument("l1 bound must be positive");
  if (v.cwiseAbs().sum() <= bound) return v;
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(v[static_cast<Eigen::Index>(a)]) > std::abs(v[static_cast<Eigen::Index>(b)]);
  });
  double cumulative = 0.0;
  double shift = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double u = std::abs(v[static_cast<Eigen::Index>(order[r])]);
    cumulative += u;
    const double candidate = (cumulative - bound) / static_cast<double>(r + 1);
    if (u > candidate) shift = candidate;
  }
  Eigen::VectorXd out(v.size());
  for (Eigen::Index a = 0; a < v.size(); ++a) {
    const double mag = std::max(std::abs(v[a]) - shift, 0.0);
    out[a] = std::copysign(mag, v[a]);
  }
  return out;
}

Eigen::VectorXd project_intersection(const Eigen::VectorXd& v, const GroupL1Constraints& constraints, double tol,
                                     int max_iter) {
  if (!(tol > 0)) throw std::invalid_argument("projection tolerance must be positive");
  if (constraints.max_violation(v) <= 0) return v;
  if (constraints.groups.size() == 1) {
    Eigen::VectorXd x = v;
    project_group(x, constraints.groups.front().members, constraints.B);
    return x;
  }
  Eigen::VectorXd x = v;
  std::vector<Eigen::VectorXd> increments(constraints.groups.size(), Eigen::VectorXd::Zero(v.size()));
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    const Eigen::VectorXd start = x;
    for (std::size_t g = 0; g < constraints.groups.size(); ++g) {
      Eigen::VectorXd y = x + increments[g];
      project_group(y, constraints.groups[g].members, constraints.B);
      increments[g] += x - y;
      x = std::move(y);
    }
    if ((x - start).norm() < tol && constraints.max_violation(x) <= tol) return x;
  }
  if (constraints.max_violation(x) > tol) throw std::runtime_error("Dykstra projection did not reach feasibility");
  return x;
}

SolveResult solve(const LocalQuadratic& quad, const GroupL1Constraints& constraints, const SolverOptions& options) {
  const Eigen::Index k = quad.dim();
  if (quad.H.rows() != k || quad.H.cols() != k || quad.b.size() != k) {
    throw std::invalid_argument("quadratic has inconsistent dimensions");
  }
  for (const auto& g : constraints.groups) {
    for (int a : g.members) {
      if (a < 0 || a >= k) throw std::invalid_argument("constraint member outside the active set");
    }
  }
  SolveResult result;
  if (k == 0) {
    result.theta_hat = Eigen::VectorXd(0);
    result.value = quad.c0;
    result.converged = true;
    return result;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(quad.H, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  const double scale = std::max(std::abs(lmin), std::abs(lmax));
  if (lmin < -1e-9 * scale) throw std::invalid_argument("quadratic is not positive semidefinite");
  const double L = 1.01 * std::max(lmax, 1e-12 * std::max(1.0, quad.b.norm()));

  const double tol = options.tol > 0 ? options.tol : options.tol_scale * 1e-8 * (1.0 + std::abs(quad.c0));
  const int max_iter = options.max_iter > 0 ? options.max_iter : 50 * static_cast<int>(k);

  Run run = descend(quad, constraints, L, Eigen::VectorXd::Zero(k), tol, max_iter);
  result.theta_hat = run.theta;
  result.value = quad.value(run.theta);
  result.iterations = run.iterations;
  result.converged = run.converged;
  if (options.certify) {
    const Run ref = descend(quad, constraints, L, run.theta, tol / 100.0, 10 * max_iter);
    result.eta_bound = std::max(0.0, result.value - quad.value(ref.theta));
  }
  return result;
}

nlohmann::json to_json(const SolveResult& result) {
  return {{"theta_hat", std::vector<double>(result.theta_hat.data(), result.theta_hat.data() + result.theta_hat.size())},
          {"value", result.value},
          {"eta_bound", result.eta_bound},
          {"iterations", result.iterations},
          {"converged", result.converged}};
}

}  // namespace expfam
