#include <cmath>
#include <vector>

#include "doctest.h"
#include "expfam/qp_solver.hpp"
#include "instances.hpp"
#include "oracles/grid_qp.hpp"

using namespace expfam;

namespace {

GroupL1Constraints one_group(int k, double B) {
  GroupL1Constraints c;
  c.B = B;
  GroupL1Constraints::Group g;
  for (int a = 0; a < k; ++a) g.members.push_back(a);
  c.groups.push_back(g);
  return c;
}

LocalQuadratic identity_quad(Eigen::VectorXd b) {
  LocalQuadratic q;
  const auto k = b.size();
  for (Eigen::Index a = 0; a < k; ++a) q.active.push_back(static_cast<int>(a));
  q.H = Eigen::MatrixXd::Identity(k, k);
  q.b = std::move(b);
  return q;
}

// Nearest point of the constraint set by brute force: minimizes 1/2|u - v|^2.
Eigen::VectorXd grid_projection(const Eigen::VectorXd& v, const GroupL1Constraints& c) {
  return oracle::grid_qp(identity_quad(-v), c).argmin;
}

}  // namespace

TEST_CASE("l1 projection hand cases") {
  CHECK(project_l1(Eigen::Vector2d(1, 1), 2) == Eigen::Vector2d(1, 1));
  CHECK(project_l1(Eigen::Vector2d(3, 0), 1).isApprox(Eigen::Vector2d(1, 0)));
  const Eigen::VectorXd p = project_l1(Eigen::Vector2d(2, 1), 1);
  CHECK((p - grid_projection(Eigen::Vector2d(2, 1), one_group(2, 1))).norm() < 1e-3);
  CHECK(p.isApprox(Eigen::Vector2d(1, 0)));
  CHECK(project_l1(Eigen::Vector3d(-2, 0.5, 0.5), 1).isApprox(Eigen::Vector3d(-1, 0, 0)));
  CHECK_THROWS(project_l1(Eigen::Vector2d(1, 1), 0));
}

TEST_CASE("l1 projection is the nearest feasible point") {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    const int k = rng.uniform_int(2, 3);
    Eigen::VectorXd v(k);
    for (auto& x : v) x = rng.uniform(-3, 3);
    const double B = rng.uniform(0.5, 2);
    const Eigen::VectorXd p = project_l1(v, B);
    CHECK(p.cwiseAbs().sum() <= B + 1e-12);
    CHECK((p - grid_projection(v, one_group(k, B))).norm() < 1e-3);
  }
}

TEST_CASE("intersection projection") {
  GroupL1Constraints c;
  c.B = 1;
  c.groups = {{0, {0, 1}}, {1, {1, 2}}};
  const Eigen::Vector3d feasible(0.2, 0.3, 0.1);
  CHECK(project_intersection(feasible, c) == feasible);

  const auto single = one_group(3, 1.0);
  const Eigen::Vector3d v(2, -1, 0.5);
  CHECK(project_intersection(v, single).isApprox(project_l1(v, 1.0)));

  const Eigen::Vector3d ones(1, 1, 1);
  const Eigen::VectorXd p = project_intersection(ones, c);
  CHECK(c.max_violation(p) <= 1e-9);
  CHECK((p - grid_projection(ones, c)).norm() < 1e-3);

  Rng rng(13);
  for (int t = 0; t < 20; ++t) {
    const int k = rng.uniform_int(2, 3);
    const auto cons = inst::random_groups(rng, k, rng.uniform(0.5, 1.5));
    Eigen::VectorXd w(k);
    for (auto& x : w) x = rng.uniform(-3, 3);
    const Eigen::VectorXd q = project_intersection(w, cons);
    CHECK(cons.max_violation(q) <= 1e-9);
    CHECK((q - grid_projection(w, cons)).norm() < 1e-3);
  }
}

TEST_CASE("solver closed-form cases") {
  const auto c1 = one_group(2, 1.0);
  auto q = identity_quad(Eigen::Vector2d::Zero());
  q.c0 = 0.7;
  auto r = solve(q, c1);
  CHECK(r.theta_hat.norm() == 0.0);
  CHECK(r.value == 0.7);
  CHECK(r.converged);

  r = solve(identity_quad(Eigen::Vector2d(-0.1, 0)), c1);
  CHECK((r.theta_hat - Eigen::Vector2d(0.1, 0)).norm() < 1e-7);

  const auto far = identity_quad(Eigen::Vector2d(-5, 0));
  r = solve(far, c1);
  CHECK((r.theta_hat - oracle::grid_qp(far, c1).argmin).norm() < 1e-3);
  CHECK((r.theta_hat - Eigen::Vector2d(1, 0)).norm() < 1e-7);
}

TEST_CASE("solver rejects indefinite or inconsistent inputs") {
  auto q = identity_quad(Eigen::Vector2d(1, 1));
  q.H(1, 1) = -1;
  CHECK_THROWS_AS(solve(q, one_group(2, 1)), std::invalid_argument);
  auto r = identity_quad(Eigen::Vector2d(1, 1));
  CHECK_THROWS_AS(solve(r, one_group(3, 1)), std::invalid_argument);
  CHECK_THROWS_AS(local_constraints(Family::all_monomials(2, 1, 1, 0), std::vector<int>{0, 1}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("local constraints cover every active factor") {
  const Family fam = Family::all_monomials(4, 2, 2, 0);
  for (int i = 0; i < 4; ++i) {
    const auto& Ki = fam.factors_containing(i);
    const auto c = local_constraints(fam, Ki, 2.0);
    std::vector<int> seen(Ki.size(), 0);
    for (const auto& g : c.groups) {
      for (int a : g.members) {
        CHECK(fam.factor(Ki[static_cast<std::size_t>(a)]).contains(g.variable));
        seen[static_cast<std::size_t>(a)] = 1;
      }
    }
    for (int s : seen) CHECK(s == 1);
    CHECK(c.B == 2.0);
  }
}

TEST_CASE("solutions are feasible, optimal against the grid and certified") {
  Rng rng(14);
  for (int t = 0; t < 30; ++t) {
    const int k = rng.uniform_int(2, 3);
    const auto q = inst::random_psd_quadratic(rng, k, 0.05, 3.0, 4.0);
    const auto c = inst::random_groups(rng, k, rng.uniform(0.5, 1.5));
    const auto r = solve(q, c);
    const auto g = oracle::grid_qp(q, c);
    CHECK(c.max_violation(r.theta_hat) <= 1e-9);
    CHECK(r.value <= g.value + 1e-6);
    CHECK(r.eta_bound >= 0.0);
    CHECK(r.eta_bound >= r.value - g.value - 1e-6);
  }
}

TEST_CASE("objective is non-increasing along the iterates") {
  Rng rng(15);
  for (int t = 0; t < 10; ++t) {
    const int k = rng.uniform_int(2, 5);
    const auto q = inst::random_psd_quadratic(rng, k, 0.01, 5.0, 4.0);
    const auto c = inst::random_groups(rng, k, 1.0);
    double previous = q.value(Eigen::VectorXd::Zero(k));
    for (int iters = 1; iters <= 40; ++iters) {
      SolverOptions o;
      o.max_iter = iters;
      o.certify = false;
      o.tol = 1e-300;
      const double v = solve(q, c, o).value;
      CHECK(v <= previous + 1e-15);
      previous = v;
    }
  }
}

TEST_CASE("argmin is invariant under positive scaling of the objective") {
  Rng rng(16);
  for (int t = 0; t < 20; ++t) {
    const int k = rng.uniform_int(2, 4);
    auto q = inst::random_psd_quadratic(rng, k, 0.2, 3.0, 4.0);
    const auto c = inst::random_groups(rng, k, 1.0);
    const auto r1 = solve(q, c);
    for (double s : {0.01, 7.0}) {
      auto scaled = q;
      scaled.H *= s;
      scaled.b *= s;
      scaled.c0 *= s;
      SolverOptions o;
      o.tol = 1e-11;
      const auto r2 = solve(scaled, c, o);
      CHECK((r1.theta_hat - r2.theta_hat).norm() < 1e-5);
    }
  }
}

TEST_CASE("loosened tolerance keeps the certificate sound") {
  Rng rng(17);
  for (int t = 0; t < 15; ++t) {
    const int k = rng.uniform_int(2, 3);
    const auto q = inst::random_psd_quadratic(rng, k, 0.05, 3.0, 4.0);
    const auto c = inst::random_groups(rng, k, 1.0);
    SolverOptions loose;
    loose.tol_scale = 100;
    const auto r = solve(q, c, loose);
    const auto g = oracle::grid_qp(q, c);
    CHECK(r.eta_bound >= r.value - g.value - 1e-6);
    CHECK(c.max_violation(r.theta_hat) <= 1e-9);
  }
}

TEST_CASE("empty active set") {
  LocalQuadratic q;
  q.H = Eigen::MatrixXd(0, 0);
  q.b = Eigen::VectorXd(0);
  q.c0 = 1.5;
  const auto r = solve(q, GroupL1Constraints{});
  CHECK(r.value == 1.5);
  CHECK(r.theta_hat.size() == 0);
}
