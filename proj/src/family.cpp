#include "expfam/family.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace expfam {

namespace {

double ipow(double base, int exp) {
  double out = 1.0;
  for (int e = 0; e < exp; ++e) out *= base;
  return out;
}

void check_dimension(const Factor& factor, std::span<const double> x) {
  if (factor.min_dimension() > static_cast<int>(x.size())) {
    throw std::invalid_argument("factor " + factor.to_string() + " does not fit a point of dimension " +
                                std::to_string(x.size()));
  }
}

}  // namespace

Factor::Factor(std::vector<Term> terms) : terms_(std::move(terms)) {
  std::sort(terms_.begin(), terms_.end());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    if (terms_[t].first < 0) throw std::invalid_argument("negative variable index in factor");
    if (terms_[t].second <= 0) throw std::invalid_argument("factor degrees must be positive");
    if (t > 0 && terms_[t].first == terms_[t - 1].first) {
      throw std::invalid_argument("repeated variable in factor");
    }
  }
}

int Factor::degree_of(int var) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), Term{var, 0});
  return (it != terms_.end() && it->first == var) ? it->second : 0;
}

int Factor::total_degree() const {
  int total = 0;
  for (const auto& [var, deg] : terms_) total += deg;
  return total;
}

std::vector<int> Factor::support() const {
  std::vector<int> out;
  out.reserve(terms_.size());
  for (const auto& [var, deg] : terms_) out.push_back(var);
  return out;
}

std::string Factor::to_string() const {
  if (terms_.empty()) return "1";
  std::ostringstream os;
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    if (t > 0) os << '*';
    os << 'x' << (terms_[t].first + 1);
    if (terms_[t].second > 1) os << '^' << terms_[t].second;
  }
  return os.str();
}

bool canonical_less(const Factor& a, const Factor& b) {
  // Walk both sparse lists as if they were dense exponent sequences.
  auto ta = a.terms();
  auto tb = b.terms();
  std::size_t ia = 0;
  std::size_t ib = 0;
  while (ia < ta.size() || ib < tb.size()) {
    const int va = ia < ta.size() ? ta[ia].first : std::numeric_limits<int>::max();
    const int vb = ib < tb.size() ? tb[ib].first : std::numeric_limits<int>::max();
    const int var = std::min(va, vb);
    const int da = va == var ? ta[ia].second : 0;
    const int db = vb == var ? tb[ib].second : 0;
    if (da != db) return da < db;
    if (va == var) ++ia;
    if (vb == var) ++ib;
  }
  return false;
}

double eval_basis(const Factor& factor, std::span<const double> x) {
  check_dimension(factor, x);
  double out = 1.0;
  for (const auto& [var, deg] : factor.terms()) out *= ipow(x[static_cast<std::size_t>(var)], deg);
  return out;
}

double partial_derivative(const Factor& factor, int i, int order, std::span<const double> x) {
  if (order != 1 && order != 2) throw std::invalid_argument("derivative order must be 1 or 2");
  check_dimension(factor, x);
  const int ki = factor.degree_of(i);
  if (ki < order) return 0.0;
  double out = order == 1 ? ki : static_cast<double>(ki) * (ki - 1);
  for (const auto& [var, deg] : factor.terms()) {
    const double xv = x[static_cast<std::size_t>(var)];
    out *= ipow(xv, var == i ? deg - order : deg);
  }
  return out;
}

Family::Family(int n, int d, std::vector<Factor> factors, int base_exponent)
    : n_(n), d_(d), base_exponent_(base_exponent), factors_(std::move(factors)) {
  if (n < 1) throw std::invalid_argument("family needs at least one variable");
  if (d < 1) throw std::invalid_argument("family degree bound must be positive");
  if (base_exponent < 0) throw std::invalid_argument("base exponent must be nonnegative");
  std::sort(factors_.begin(), factors_.end(), canonical_less);
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    const Factor& f = factors_[k];
    if (f.empty()) throw std::invalid_argument("constant factor is not identifiable");
    if (f.min_dimension() > n) throw std::invalid_argument("factor " + f.to_string() + " uses a variable beyond n");
    if (f.total_degree() > d) throw std::invalid_argument("factor " + f.to_string() + " exceeds degree bound");
    if (k > 0 && f == factors_[k - 1]) throw std::invalid_argument("duplicate factor " + f.to_string());
    w_ = std::max(w_, static_cast<int>(f.support_size()));
  }
  containing_.assign(static_cast<std::size_t>(n), {});
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    for (const auto& [var, deg] : factors_[k].terms()) containing_[static_cast<std::size_t>(var)].push_back(static_cast<int>(k));
  }
}

Family Family::all_monomials(int n, int d, int w, int base_exponent, bool multilinear) {
  std::vector<Factor> out;
  std::vector<Factor::Term> current;
  std::function<void(int, int)> rec = [&](int var, int remaining) {
    if (var == n) {
      if (!current.empty()) out.emplace_back(current);
      return;
    }
    rec(var + 1, remaining);
    if (static_cast<int>(current.size()) >= w) return;
    const int max_deg = multilinear ? std::min(1, remaining) : remaining;
    for (int deg = 1; deg <= max_deg; ++deg) {
      current.emplace_back(var, deg);
      rec(var + 1, remaining - deg);
      current.pop_back();
    }
  };
  rec(0, d);
  return Family(n, d, std::move(out), base_exponent);
}

std::optional<int> Family::index_of(const Factor& f) const {
  auto it = std::lower_bound(factors_.begin(), factors_.end(), f, canonical_less);
  if (it != factors_.end() && *it == f) return static_cast<int>(it - factors_.begin());
  return std::nullopt;
}

double Family::log_base_derivative(int i, int order, std::span<const double> x) const {
  const int p = base_exponent_;
  const double xi = x[static_cast<std::size_t>(i)];
  if (order == 1) return p >= 1 ? -p * ipow(xi, p - 1) : 0.0;
  if (order == 2) return p >= 2 ? -static_cast<double>(p) * (p - 1) * ipow(xi, p - 2) : 0.0;
  throw std::invalid_argument("derivative order must be 1 or 2");
}

double Family::log_base(std::span<const double> x) const {
  if (base_exponent_ == 0) return 0.0;
  double out = 0.0;
  for (double v : x) out -= ipow(v, base_exponent_);
  return out;
}

std::vector<double> group_l1_norms(const Family& family, std::span<const double> theta) {
  if (theta.size() != family.size()) throw std::invalid_argument("theta length does not match the factor set");
  std::vector<double> g(static_cast<std::size_t>(family.n()), 0.0);
  for (int j = 0; j < family.n(); ++j) {
    for (int k : family.factors_containing(j)) g[static_cast<std::size_t>(j)] += std::abs(theta[static_cast<std::size_t>(k)]);
  }
  return g;
}

std::vector<double> align_theta(const Family& family, std::span<const std::pair<Factor, double>> weights) {
  std::vector<double> theta(family.size(), 0.0);
  for (const auto& [factor, value] : weights) {
    const auto k = family.index_of(factor);
    if (!k) throw std::invalid_argument("factor " + factor.to_string() + " is not in the family");
    theta[static_cast<std::size_t>(*k)] = value;
  }
  return theta;
}

Model::Model(Family family, std::vector<double> theta_star, int B, TailSpec tail)
    : family_(std::move(family)), theta_(std::move(theta_star)), B_(B), tail_(tail) {
  if (B_ < 1) throw std::invalid_argument("l1 bound B must be a positive integer");
  const auto g = group_l1_norms(family_, theta_);
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j] > B_ + 1e-12) {
      throw std::invalid_argument("theta* violates the l1 bound at x" + std::to_string(j + 1));
    }
  }
  if (!(tail_.decay > 0)) throw std::invalid_argument("tail decay must be positive");
  const int d = family_.d();
  const double lower = d > 1 ? std::max(std::pow(std::log(2.0) / tail_.decay, 1.0 / (d - 1)), 1.0) : 1.0;
  if (tail_.C_t < lower - 1e-12 || tail_.C_t > std::exp(static_cast<double>(family_.n()))) {
    throw std::invalid_argument("C_t = " + std::to_string(tail_.C_t) + " outside the admissible tail range");
  }
}

double Model::log_density_unnormalized(std::span<const double> x) const {
  double out = family_.log_base(x);
  for (std::size_t k = 0; k < theta_.size(); ++k) {
    if (theta_[k] != 0.0) out += theta_[k] * eval_basis(family_.factors()[k], x);
  }
  return out;
}

}  // namespace expfam
