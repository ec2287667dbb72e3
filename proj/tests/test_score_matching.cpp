#include <cmath>
#include <vector>

#include "doctest.h"
#include "desk_models.hpp"
#include "expfam/score_matching.hpp"
#include "expfam/stats.hpp"
#include "instances.hpp"
#include "oracles/finite_diff.hpp"
#include "oracles/quadrature.hpp"

using namespace expfam;

namespace {

double mean_loss(const Family& fam, const std::vector<double>& theta, int i, const SampleBatch& b) {
  double s = 0.0;
  for (int m = 0; m < b.M; ++m) s += local_loss(fam, theta, i, b.row(m));
  return s / b.M;
}

Eigen::VectorXd active_part(const LocalQuadratic& q, const std::vector<double>& theta) {
  return restrict_to(q.active, theta);
}

SampleBatch single_row(std::vector<double> x) {
  SampleBatch b;
  b.n = static_cast<int>(x.size());
  b.M = 1;
  b.data = std::move(x);
  return b;
}

}  // namespace

TEST_CASE("local loss on hand examples") {
  const Family lin(1, 1, {Factor({{0, 1}})}, 0);
  CHECK(local_loss(lin, std::vector<double>{2.0}, 0, std::vector<double>{-0.7}) == doctest::Approx(2.0));
  const Family sq(1, 2, {Factor({{0, 2}})}, 0);
  CHECK(local_loss(sq, std::vector<double>{1.0}, 0, std::vector<double>{1.0}) == doctest::Approx(4.0));
  CHECK_THROWS(local_loss(sq, std::vector<double>{1.0, 2.0}, 0, std::vector<double>{1.0}));
}

TEST_CASE("single-sample quadratic reproduces the pointwise loss") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const Family fam = inst::random_family(rng, 4, 3);
    const auto theta = inst::random_theta(rng, fam);
    std::vector<double> x(static_cast<std::size_t>(fam.n()));
    for (double& v : x) v = rng.uniform(-2, 2);
    const int i = rng.uniform_int(0, fam.n() - 1);
    const LocalQuadratic q = assemble_quadratic(fam, i, single_row(x));
    CHECK(q.value(active_part(q, theta)) == doctest::Approx(local_loss(fam, theta, i, x)).epsilon(1e-10));
  }
}

TEST_CASE("assembled quadratic for a lone linear factor") {
  Rng rng(1);
  const Family lin(1, 1, {Factor({{0, 1}})}, 0);
  const LocalQuadratic q = assemble_quadratic(lin, 0, inst::random_batch(rng, 1, 100));
  CHECK(q.H(0, 0) == doctest::Approx(1.0));
  CHECK(q.b[0] == doctest::Approx(0.0));
  CHECK(q.c0 == doctest::Approx(0.0));
}

TEST_CASE("linear term under a Gaussian base measure is the loss slope at zero") {
  Rng rng(2);
  const Family fam(1, 1, {Factor({{0, 1}})}, 2);
  const SampleBatch b = inst::random_batch(rng, 1, 200);
  const LocalQuadratic q = assemble_quadratic(fam, 0, b);
  double xbar = 0.0;
  for (double v : b.data) xbar += v;
  xbar /= b.M;
  CHECK(q.b[0] == doctest::Approx(-2 * xbar).epsilon(1e-12));
  auto L = [&](double t) { return mean_loss(fam, {t}, 0, b); };
  CHECK(oracle::close_rel(q.b[0], oracle::central_difference(L, 0.0), 1e-7));
}

TEST_CASE("mean loss equals the quadratic form for random parameters") {
  Rng rng(41);
  for (int t = 0; t < 20; ++t) {
    const Family fam = inst::random_family(rng, 4, 3);
    const SampleBatch b = inst::random_batch(rng, fam.n(), rng.uniform_int(1, 100));
    const int i = rng.uniform_int(0, fam.n() - 1);
    const LocalQuadratic q = assemble_quadratic(fam, i, b);
    for (int r = 0; r < 20; ++r) {
      const auto theta = inst::random_theta(rng, fam);
      CHECK(oracle::close_rel(q.value(active_part(q, theta)), mean_loss(fam, theta, i, b), 1e-9));
    }
  }
}

TEST_CASE("blocked and serial assembly agree") {
  Rng rng(5);
  const Model m = desk::quartic3();
  const SampleBatch b = inst::random_batch(rng, 3, 9000);
  for (int i = 0; i < 3; ++i) {
    const LocalQuadratic p = assemble_quadratic(m.family(), i, b);
    const LocalQuadratic s = assemble_quadratic_serial(m.family(), i, b);
    CHECK(p.active == s.active);
    CHECK((p.H - s.H).cwiseAbs().maxCoeff() <= 1e-12 * (1 + s.H.cwiseAbs().maxCoeff()));
    CHECK((p.b - s.b).cwiseAbs().maxCoeff() <= 1e-12 * (1 + s.b.cwiseAbs().maxCoeff()));
    CHECK(p.c0 == doctest::Approx(s.c0).epsilon(1e-12));
    const LocalQuadratic again = assemble_quadratic(m.family(), i, b);
    CHECK(again.H == p.H);
    CHECK(again.b == p.b);
  }
}

TEST_CASE("kept factors restrict the active set") {
  const Model m = desk::quartic3();
  const auto& fam = m.family();
  const std::vector<int> kept = {0, 1, 2, 3};
  const auto active = active_factors(fam, 2, kept);
  for (int k : active) {
    CHECK(fam.factor(k).contains(2));
    CHECK(k <= 3);
  }
  Rng rng(3);
  const SampleBatch b = inst::random_batch(rng, 3, 50);
  const LocalQuadratic q = assemble_quadratic(fam, 2, b, kept);
  CHECK(q.active == active);
  CHECK(q.dim() == static_cast<Eigen::Index>(active.size()));
}

TEST_CASE("assembled Hessians are positive semidefinite") {
  Rng rng(6);
  for (int t = 0; t < 40; ++t) {
    const Family fam = inst::random_family(rng, 4, 3);
    const SampleBatch b = inst::random_batch(rng, fam.n(), rng.uniform_int(1, 60));
    const LocalQuadratic q = assemble_quadratic(fam, rng.uniform_int(0, fam.n() - 1), b);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.H);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, q.H.norm()));
    for (int r = 0; r < 5; ++r) {
      Eigen::VectorXd delta = Eigen::VectorXd::Random(q.dim());
      CHECK(excess_loss(q, delta) >= 0.0);
    }
  }
}

TEST_CASE("value and gradient") {
  LocalQuadratic q;
  q.active = {0, 1};
  q.H = Eigen::Matrix2d::Identity();
  q.b = Eigen::Vector2d::Zero();
  q.c0 = 0.25;
  const auto at0 = quad_value_grad(q, Eigen::Vector2d::Zero());
  CHECK(at0.value == 0.25);
  CHECK(at0.grad == q.b);
  const auto e1 = quad_value_grad(q, Eigen::Vector2d(1, 0));
  CHECK(e1.value == doctest::Approx(0.75));
  CHECK(e1.grad == Eigen::Vector2d(1, 0));
  CHECK_THROWS(quad_value_grad(q, Eigen::Vector3d::Zero()));

  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto r = inst::random_psd_quadratic(rng, rng.uniform_int(1, 6), 0.0, 3.0, 2.0);
    Eigen::VectorXd theta(r.dim());
    for (auto& v : theta) v = rng.uniform(-2, 2);
    const auto vg = quad_value_grad(r, theta);
    for (Eigen::Index a = 0; a < r.dim(); ++a) {
      auto along = [&](double s) {
        Eigen::VectorXd y = theta;
        y[a] = s;
        return r.value(y);
      };
      CHECK(oracle::close_rel(vg.grad[a], oracle::central_difference(along, theta[a]), 1e-6));
    }
  }
}

TEST_CASE("excess loss is the exact second-order remainder") {
  LocalQuadratic q;
  q.active = {0, 1};
  q.H = Eigen::Matrix2d::Identity();
  q.b = Eigen::Vector2d::Zero();
  CHECK(excess_loss(q, Eigen::Vector2d::Zero()) == 0.0);
  CHECK(excess_loss(q, Eigen::Vector2d(1, 0)) == doctest::Approx(0.5));
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto r = inst::random_psd_quadratic(rng, 4, 0.0, 2.0, 1.0);
    Eigen::VectorXd th = Eigen::VectorXd::Random(4), delta = Eigen::VectorXd::Random(4);
    const double lhs = r.value(th + delta) - r.value(th) - quad_value_grad(r, th).grad.dot(delta);
    CHECK(std::abs(lhs - excess_loss(r, delta)) <= 1e-10);
  }
}

TEST_CASE("score error field") {
  const Family fam(2, 2, {Factor({{0, 1}, {1, 1}})}, 0);
  const std::vector<int> f = {0};
  CHECK(score_error_field(fam, 0, f, Eigen::VectorXd::Zero(1), std::vector<double>{1.0, 3.0}) == 0.0);
  CHECK(score_error_field(fam, 0, f, Eigen::VectorXd::Ones(1), std::vector<double>{1.0, 3.0}) == 3.0);

  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const Family rf = inst::random_family(rng, 4, 3);
    const SampleBatch b = inst::random_batch(rng, rf.n(), 80);
    const int i = rng.uniform_int(0, rf.n() - 1);
    const LocalQuadratic q = assemble_quadratic(rf, i, b);
    Eigen::VectorXd delta(q.dim());
    for (auto& v : delta) v = rng.uniform(-1, 1);
    double s = 0.0;
    for (int m = 0; m < b.M; ++m) {
      const double e = score_error_field(rf, i, q.active, delta, b.row(m));
      s += e * e;
    }
    CHECK(std::abs(s / b.M - delta.dot(q.H * delta)) <= 1e-10 * std::max(1.0, s / b.M));
  }
}

TEST_CASE("empirical Hessian converges to the population Hessian") {
  const Family fam(2, 2, {Factor({{0, 1}}), Factor({{0, 2}}), Factor({{0, 1}, {1, 1}})}, 4);
  std::vector<double> theta(fam.size());
  theta[static_cast<std::size_t>(*fam.index_of(Factor({{0, 1}})))] = 0.2;
  theta[static_cast<std::size_t>(*fam.index_of(Factor({{0, 2}})))] = -0.3;
  theta[static_cast<std::size_t>(*fam.index_of(Factor({{0, 1}, {1, 1}})))] = 0.4;
  const Model m(fam, theta, 1, {1.0, 3});
  const SampleBatch batch = draw_samples(m, 100000, {1024, 200, 2}, 99);
  const LocalQuadratic q = assemble_quadratic(fam, 0, batch);
  const auto rule = oracle::simpson_rule(-4, 4, 240);
  for (Eigen::Index a = 0; a < q.dim(); ++a) {
    for (Eigen::Index c = a; c < q.dim(); ++c) {
      const Factor& fa = fam.factor(q.active[static_cast<std::size_t>(a)]);
      const Factor& fc = fam.factor(q.active[static_cast<std::size_t>(c)]);
      auto entry = [&](std::span<const double> x) { return partial_derivative(fa, 0, 1, x) * partial_derivative(fc, 0, 1, x); };
      const auto pop = oracle::tensor_expectations(
          2, rule, [&](const std::vector<double>& x) { return m.log_density_unnormalized(x); },
          {[&](const std::vector<double>& x) { return entry(x); }});
      std::vector<double> series(static_cast<std::size_t>(batch.M));
      for (int r = 0; r < batch.M; ++r) series[static_cast<std::size_t>(r)] = entry(batch.row(r));
      CHECK(std::abs(q.H(a, c) - pop[0]) <= 3 * batch_means_stderr(series));
    }
  }
}

TEST_CASE("quadratic JSON round trip") {
  Rng rng(10);
  const Model m = desk::quartic3();
  const LocalQuadratic q = assemble_quadratic(m.family(), 1, inst::random_batch(rng, 3, 30));
  const LocalQuadratic r = quadratic_from_json(to_json(q));
  CHECK(r.vertex == q.vertex);
  CHECK(r.active == q.active);
  CHECK(r.H == q.H);
  CHECK(r.b == q.b);
  CHECK(r.c0 == q.c0);
  CHECK(r.num_samples == q.num_samples);
}
