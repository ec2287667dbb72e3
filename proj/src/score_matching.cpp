#include "expfam/score_matching.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>

namespace expfam {

namespace {

constexpr int kBlockRows = 2048;

struct Accumulator {
  Eigen::MatrixXd H;
  Eigen::VectorXd b;
  double c0 = 0.0;

  explicit Accumulator(Eigen::Index k) : H(Eigen::MatrixXd::Zero(k, k)), b(Eigen::VectorXd::Zero(k)) {}

  void add_rows(const Family& family, int i, const std::vector<int>& active, const SampleBatch& batch, int begin,
                int end) {
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd g(k);
    for (int m = begin; m < end; ++m) {
      const auto x = batch.row(m);
      const double dh = family.log_base_derivative(i, 1, x);
      const double d2h = family.log_base_derivative(i, 2, x);
      for (Eigen::Index a = 0; a < k; ++a) {
        const Factor& f = family.factor(active[static_cast<std::size_t>(a)]);
        g[a] = partial_derivative(f, i, 1, x);
        b[a] += partial_derivative(f, i, 2, x) + dh * g[a];
      }
      H.selfadjointView<Eigen::Lower>().rankUpdate(g);
      c0 += d2h + 0.5 * dh * dh;
    }
  }
};

void check_batch(const Family& family, int i, const SampleBatch& batch) {
  if (batch.n != family.n()) throw std::invalid_argument("sample dimension does not match the family");
  if (batch.M < 1) throw std::invalid_argument("empty sample batch");
  if (i < 0 || i >= family.n()) throw std::out_of_range("vertex out of range");
}

LocalQuadratic finish(int i, std::vector<int> active, Accumulator acc, int M) {
  LocalQuadratic q;
  q.vertex = i;
  q.active = std::move(active);
  q.H = acc.H.selfadjointView<Eigen::Lower>();
  q.H /= M;
  q.b = acc.b / M;
  q.c0 = acc.c0 / M;
  q.num_samples = M;
  return q;
}

void check_size(const LocalQuadratic& quad, const Eigen::VectorXd& v) {
  if (v.size() != quad.dim()) throw std::invalid_argument("vector size does not match the quadratic");
}

}  // namespace

double LocalQuadratic::value(const Eigen::VectorXd& theta) const {
  check_size(*this, theta);
  return c0 + b.dot(theta) + 0.5 * theta.dot(H * theta);
}

double local_loss(const Family& family, std::span<const double> theta, int i, std::span<const double> x) {
  if (theta.size() != family.size()) throw std::invalid_argument("theta length does not match the factor set");
  double d1 = family.log_base_derivative(i, 1, x);
  double d2 = family.log_base_derivative(i, 2, x);
  for (int k : family.factors_containing(i)) {
    const double t = theta[static_cast<std::size_t>(k)];
    d1 += t * partial_derivative(family.factor(k), i, 1, x);
    d2 += t * partial_derivative(family.factor(k), i, 2, x);
  }
  return d2 + 0.5 * d1 * d1;
}

std::vector<int> active_factors(const Family& family, int i, std::span<const int> kept) {
  const auto& Ki = family.factors_containing(i);
  if (kept.empty()) return Ki;
  std::vector<int> sorted(kept.begin(), kept.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> out;
  std::set_intersection(Ki.begin(), Ki.end(), sorted.begin(), sorted.end(), std::back_inserter(out));
  return out;
}

LocalQuadratic assemble_quadratic(const Family& family, int i, const SampleBatch& batch, std::span<const int> kept) {
  check_batch(family, i, batch);
  auto active = active_factors(family, i, kept);
  const auto k = static_cast<Eigen::Index>(active.size());
  const int blocks = (batch.M + kBlockRows - 1) / kBlockRows;
  std::vector<Accumulator> partial(static_cast<std::size_t>(blocks), Accumulator(k));
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int begin = blk * kBlockRows;
    partial[static_cast<std::size_t>(blk)].add_rows(family, i, active, batch, begin,
                                                    std::min(begin + kBlockRows, batch.M));
  }
  Accumulator total(k);
  for (const auto& p : partial) {
    total.H += p.H;
    total.b += p.b;
    total.c0 += p.c0;
  }
  return finish(i, std::move(active), std::move(total), batch.M);
}

LocalQuadratic assemble_quadratic_serial(const Family& family, int i, const SampleBatch& batch,
                                         std::span<const int> kept) {
  check_batch(family, i, batch);
  auto active = active_factors(family, i, kept);
  Accumulator acc(static_cast<Eigen::Index>(active.size()));
  acc.add_rows(family, i, active, batch, 0, batch.M);
  return finish(i, std::move(active), std::move(acc), batch.M);
}

ValueGrad quad_value_grad(const LocalQuadratic& quad, const Eigen::VectorXd& theta) {
  check_size(quad, theta);
  const Eigen::VectorXd Ht = quad.H * theta;
  return {quad.c0 + quad.b.dot(theta) + 0.5 * theta.dot(Ht), quad.b + Ht};
}

double excess_loss(const LocalQuadratic& quad, const Eigen::VectorXd& delta) {
  check_size(quad, delta);
  return 0.5 * delta.dot(quad.H * delta);
}

double score_error_field(const Family& family, int i, std::span<const int> factors, const Eigen::VectorXd& delta,
                         std::span<const double> x) {
  if (delta.size() != static_cast<Eigen::Index>(factors.size())) {
    throw std::invalid_argument("delta size does not match the factor list");
  }
  double out = 0.0;
  for (std::size_t a = 0; a < factors.size(); ++a) {
    out += delta[static_cast<Eigen::Index>(a)] * partial_derivative(family.factor(factors[a]), i, 1, x);
  }
  return out;
}

Eigen::VectorXd restrict_to(std::span<const int> active, std::span<const double> full) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(active.size()));
  for (std::size_t a = 0; a < active.size(); ++a) out[static_cast<Eigen::Index>(a)] = full[static_cast<std::size_t>(active[a])];
  return out;
}

nlohmann::json to_json(const LocalQuadratic& quad) {
  nlohmann::json j;
  j["vertex"] = quad.vertex + 1;
  j["active"] = quad.active;
  j["num_samples"] = quad.num_samples;
  j["c0"] = quad.c0;
  j["b"] = std::vector<double>(quad.b.data(), quad.b.data() + quad.b.size());
  std::vector<double> h;
  for (Eigen::Index r = 0; r < quad.H.rows(); ++r) {
    for (Eigen::Index c = 0; c < quad.H.cols(); ++c) h.push_back(quad.H(r, c));
  }
  j["H"] = h;
  return j;
}

LocalQuadratic quadratic_from_json(const nlohmann::json& j) {
  LocalQuadratic q;
  q.vertex = j.at("vertex").get<int>() - 1;
  q.active = j.at("active").get<std::vector<int>>();
  q.num_samples = j.value("num_samples", 0);
  q.c0 = j.at("c0").get<double>();
  const auto b = j.at("b").get<std::vector<double>>();
  const auto h = j.at("H").get<std::vector<double>>();
  const auto k = static_cast<Eigen::Index>(q.active.size());
  if (static_cast<Eigen::Index>(b.size()) != k || static_cast<Eigen::Index>(h.size()) != k * k) {
    throw std::invalid_argument("quadratic JSON has inconsistent sizes");
  }
  q.b = Eigen::Map<const Eigen::VectorXd>(b.data(), k);
  q.H = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(h.data(), k, k);
  return q;
}

}  // namespace expfam
