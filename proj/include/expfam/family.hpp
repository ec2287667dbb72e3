#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace expfam {

/// A monomial basis function f_k(x) = prod_i x_i^{k_i}, stored sparsely as
/// (variable, degree) pairs sorted by variable. Variables are 0-based.
class Factor {
 public:
  using Term = std::pair<int, int>;

  Factor() = default;
  /// Throws std::invalid_argument on negative variables, non-positive degrees
  /// or repeated variables.
  explicit Factor(std::vector<Term> terms);

  std::span<const Term> terms() const { return terms_; }
  int degree_of(int var) const;
  int total_degree() const;
  std::vector<int> support() const;
  std::size_t support_size() const { return terms_.size(); }
  bool contains(int var) const { return degree_of(var) > 0; }
  bool empty() const { return terms_.empty(); }
  /// Largest variable index + 1 (0 for the empty factor).
  int min_dimension() const { return terms_.empty() ? 0 : terms_.back().first + 1; }
  std::string to_string() const;

  friend bool operator==(const Factor&, const Factor&) = default;

 private:
  std::vector<Term> terms_;
};

/// Lexicographic comparison of dense exponent sequences (k_1, ..., k_n).
bool canonical_less(const Factor& a, const Factor& b);

double eval_basis(const Factor& factor, std::span<const double> x);

/// First (order 1) or second (order 2) partial derivative of f_k in x_i.
/// Terms with a negative resulting exponent contribute 0.
double partial_derivative(const Factor& factor, int i, int order, std::span<const double> x);

/// A polynomial exponential family p(x) ∝ h(x) exp(<theta, T(x)>) with
/// monomial statistics T and base measure h(x) = exp(-sum_i x_i^p).
/// p = 0 encodes h = 1. Factors are kept in canonical order and are unique.
class Family {
 public:
  Family(int n, int d, std::vector<Factor> factors, int base_exponent);

  /// All monomials with 1 <= total degree <= d touching at most w variables.
  /// With multilinear set, every per-variable degree is 1.
  static Family all_monomials(int n, int d, int w, int base_exponent, bool multilinear = false);

  int n() const { return n_; }
  int d() const { return d_; }
  int w() const { return w_; }
  int base_exponent() const { return base_exponent_; }
  std::size_t size() const { return factors_.size(); }
  const std::vector<Factor>& factors() const { return factors_; }
  const Factor& factor(int k) const { return factors_.at(static_cast<std::size_t>(k)); }
  std::optional<int> index_of(const Factor& f) const;
  /// K_i: indices of factors whose support contains variable i.
  const std::vector<int>& factors_containing(int i) const { return containing_.at(static_cast<std::size_t>(i)); }

  /// d/dx_i log h(x) (order 1) or d^2/dx_i^2 log h(x) (order 2).
  double log_base_derivative(int i, int order, std::span<const double> x) const;
  double log_base(std::span<const double> x) const;

  friend bool operator==(const Family& a, const Family& b) {
    return a.n_ == b.n_ && a.d_ == b.d_ && a.base_exponent_ == b.base_exponent_ && a.factors_ == b.factors_;
  }

 private:
  int n_ = 0;
  int d_ = 0;
  int w_ = 0;
  int base_exponent_ = 0;
  std::vector<Factor> factors_;
  std::vector<std::vector<int>> containing_;
};

/// g_j = sum_{k in K_j} |theta_k| for every variable j.
std::vector<double> group_l1_norms(const Family& family, std::span<const double> theta);

/// Builds a theta vector aligned with the family's canonical factor order
/// from (factor, weight) pairs; unlisted factors get 0.
std::vector<double> align_theta(const Family& family, std::span<const std::pair<Factor, double>> weights);

struct TailSpec {
  double decay = 1.0;  // k in Pr(|x|_inf > s) <= exp(-k s^{d-1})
  int C_t = 1;
};

/// A family together with the true parameters theta*, the per-variable l1
/// bound B and the tail constants.
class Model {
 public:
  Model(Family family, std::vector<double> theta_star, int B, TailSpec tail);

  const Family& family() const { return family_; }
  const std::vector<double>& theta_star() const { return theta_; }
  int B() const { return B_; }
  const TailSpec& tail() const { return tail_; }

  /// log p(x) up to the log-partition constant.
  double log_density_unnormalized(std::span<const double> x) const;

 private:
  Family family_;
  std::vector<double> theta_;
  int B_;
  TailSpec tail_;
};

}  // namespace expfam
