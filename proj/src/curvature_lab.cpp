#include "expfam/curvature_lab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "expfam/score_matching.hpp"
#include "expfam/stats.hpp"
#include "grid_kernels.hpp"

namespace expfam {

namespace {

long double binom(int n, int k) {
  long double out = 1.0L;
  for (int j = 1; j <= k; ++j) out = out * static_cast<long double>(n - k + j) / static_cast<long double>(j);
  return out;
}

long double ipow_ld(long double base, int exp) {
  long double out = 1.0L;
  for (int e = 0; e < exp; ++e) out *= base;
  return out;
}

// E[s^q] for s uniform on [-half, half].
long double centered_uniform_moment(long double half, int q) {
  return q % 2 == 1 ? 0.0L : ipow_ld(half, q) / static_cast<long double>(q + 1);
}

long double cell_center(std::int64_t l, std::int64_t gamma) {
  return (static_cast<long double>(l) + 0.5L) / static_cast<long double>(gamma);
}

bool touches(const Factor& f, const Clique& c) {
  return std::any_of(c.begin(), c.end(), [&](int v) { return f.contains(v); });
}

// Log of the conditional density of x_c given the rest, up to a constant.
double conditional_log_density(const Model& model, const Clique& c, std::span<const double> x, bool base) {
  const Family& fam = model.family();
  double out = 0.0;
  for (std::size_t k = 0; k < fam.size(); ++k) {
    const double t = model.theta_star()[k];
    if (t != 0.0 && touches(fam.factor(static_cast<int>(k)), c)) out += t * eval_basis(fam.factor(static_cast<int>(k)), x);
  }
  const int p = fam.base_exponent();
  if (base && p > 0) {
    for (int j : c) out -= std::pow(x[static_cast<std::size_t>(j)], p);
  }
  return out;
}

std::vector<Factor> clique_span(const Family& family, const Clique& c) {
  std::vector<Factor> span;
  for (const auto& f : family.factors()) {
    if (f.support() == c) span.push_back(f);
  }
  return span;
}

double simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size() - 1;
  double s = f.front() + f.back();
  for (std::size_t g = 1; g < n; ++g) s += (g % 2 == 1 ? 4.0 : 2.0) * f[g];
  return s * h / 3.0;
}

// Integrals of t^0, t^1 and t^2 against exp(e(t) - shift) on [lo, hi].
std::array<double, 3> energy_moments(const UnivariateEnergy& e, double lo, double hi, int intervals, double shift) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (hi - lo) / intervals;
  std::vector<double> w(static_cast<std::size_t>(intervals) + 1);
  for (std::size_t g = 0; g < w.size(); ++g) w[g] = std::exp(e(lo + static_cast<double>(g) * h) - shift);
  std::array<double, 3> out{};
  std::vector<double> f(w.size());
  for (int m = 0; m < 3; ++m) {
    for (std::size_t g = 0; g < w.size(); ++g) f[g] = w[g] * std::pow(lo + static_cast<double>(g) * h, m);
    out[static_cast<std::size_t>(m)] = simpson(f, h);
  }
  return out;
}

double grid_max(const UnivariateEnergy& e, double lo, double hi, int points) {
  double m = -std::numeric_limits<double>::infinity();
  for (int g = 0; g < points; ++g) m = std::max(m, e(lo + (hi - lo) * g / (points - 1)));
  return m;
}

}  // namespace

std::int64_t grid_gamma(int d, int C_t, int B) {
  if (d < 1 || C_t < 1 || B < 1) throw std::invalid_argument("grid_gamma needs d, C_t, B >= 1");
  std::int64_t g = static_cast<std::int64_t>(d) * d * B;
  for (int e = 0; e < 2 * d; ++e) {
    if (g > std::numeric_limits<std::int64_t>::max() / C_t) throw std::overflow_error("gamma overflows int64");
    g *= C_t;
  }
  return g;
}

std::int64_t CenteringBox::offset_of(int var) const {
  const auto it = std::find(clique.begin(), clique.end(), var);
  if (it == clique.end()) throw std::out_of_range("variable not in the box clique");
  return offsets[static_cast<std::size_t>(it - clique.begin())];
}

CenteringBox locate_mode_box(const Model& model, const Clique& clique, std::span<const double> x, int C_t,
                             std::int64_t gamma, const ModeSearchOptions& options) {
  const Family& fam = model.family();
  if (static_cast<int>(x.size()) != fam.n()) throw std::invalid_argument("state has wrong dimension");
  if (clique.empty()) throw std::invalid_argument("empty clique");
  if (C_t < 1 || gamma < 1) throw std::invalid_argument("C_t and gamma must be positive");
  const bool base = options.include_base_term;
  const double step = 1.0 / (static_cast<double>(options.steps_per_cell) * static_cast<double>(gamma));
  const auto cells = static_cast<std::int64_t>(2) * C_t * gamma * options.steps_per_cell;
  if (cells > (1 << 26)) throw std::invalid_argument("mode grid too fine");
  const int points = static_cast<int>(cells) + 1;
  const double lo = -C_t;
  std::vector<double> energy(static_cast<std::size_t>(points));

  std::vector<double> state(x.begin(), x.end());
  auto scan = [&](int j) {
    const UnivariateEnergy e = conditional_energy(model, j, state, base);
    detail::eval_poly_grid(e.coefficients, lo, step, points, energy.data());
    int best = 0;
    for (int g = 1; g < points; ++g) {
      if (energy[static_cast<std::size_t>(g)] > energy[static_cast<std::size_t>(best)]) best = g;
    }
    double t = lo + best * step;
    // Derivative bisection inside the neighbouring grid cells.
    const double a = std::max(lo, t - step);
    const double b = std::min(static_cast<double>(C_t), t + step);
    if (e.derivative(a) > 0 && e.derivative(b) < 0) {
      double l = a;
      double r = b;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (l + r);
        (e.derivative(mid) > 0 ? l : r) = mid;
      }
      const double cand = 0.5 * (l + r);
      if (e(cand) > e(t)) t = cand;
    }
    return t;
  };

  const int c = static_cast<int>(clique.size());
  std::vector<double> best_mode;
  double best_value = -std::numeric_limits<double>::infinity();
  int starts = 1;
  for (int s = 0; s < c; ++s) starts *= 3;
  for (int s = 0; s < starts; ++s) {
    int code = s;
    for (int a = 0; a < c; ++a) {
      state[static_cast<std::size_t>(clique[static_cast<std::size_t>(a)])] = (code % 3 - 1) * static_cast<double>(C_t);
      code /= 3;
    }
    for (int sweep = 0; sweep < 100; ++sweep) {
      bool moved = false;
      for (int j : clique) {
        const double before = state[static_cast<std::size_t>(j)];
        const double t = scan(j);
        const double v_before = conditional_log_density(model, clique, state, base);
        state[static_cast<std::size_t>(j)] = t;
        if (conditional_log_density(model, clique, state, base) > v_before) {
          moved = moved || t != before;
        } else {
          state[static_cast<std::size_t>(j)] = before;
        }
      }
      if (!moved) break;
    }
    std::vector<double> mode;
    for (int j : clique) mode.push_back(state[static_cast<std::size_t>(j)]);
    const double v = conditional_log_density(model, clique, state, base);
    if (v > best_value || (v == best_value && mode < best_mode)) {
      best_value = v;
      best_mode = mode;
    }
  }

  CenteringBox box;
  box.clique = clique;
  box.gamma = gamma;
  box.mode = best_mode;
  const std::int64_t lim = static_cast<std::int64_t>(C_t) * gamma;
  for (double m : best_mode) {
    auto l = static_cast<std::int64_t>(std::floor(static_cast<long double>(m) * static_cast<long double>(gamma)));
    box.offsets.push_back(std::clamp(l, -lim, lim - 1));
  }
  return box;
}

long double centering_moment_ld(std::int64_t l, std::int64_t gamma, int m) {
  if (m < 0) throw std::invalid_argument("moment degree must be nonnegative");
  if (gamma < 1) throw std::invalid_argument("gamma must be positive");
  const long double c = cell_center(l, gamma);
  const long double half = 0.5L / static_cast<long double>(gamma);
  long double out = 0.0L;
  for (int q = 0; q <= m; q += 2) out += binom(m, q) * ipow_ld(c, m - q) * centered_uniform_moment(half, q);
  return out;
}

double centering_moment(std::int64_t l, std::int64_t gamma, int m) {
  return static_cast<double>(centering_moment_ld(l, gamma, m));
}

long double centered_covariance_ld(std::int64_t l, std::int64_t gamma, int m, int n) {
  if (m < 1 || n < 1) throw std::invalid_argument("covariance degrees must be positive");
  const long double c = cell_center(l, gamma);
  const long double half = 0.5L / static_cast<long double>(gamma);
  long double out = 0.0L;
  for (int q = 1; q <= m; ++q) {
    for (int r = 1; r <= n; ++r) {
      const long double cov = centered_uniform_moment(half, q + r) -
                              centered_uniform_moment(half, q) * centered_uniform_moment(half, r);
      if (cov == 0.0L) continue;
      out += binom(m, q) * binom(n, r) * ipow_ld(c, m - q + n - r) * cov;
    }
  }
  return out;
}

std::map<int, MatrixXld> build_A_matrices(const CenteringBox& box, int d, int reference_vertex) {
  if (d < 1) throw std::invalid_argument("degree must be positive");
  std::map<int, MatrixXld> out;
  for (std::size_t a = 0; a < box.clique.size(); ++a) {
    const int j = box.clique[a];
    const std::int64_t l = box.offsets[a];
    MatrixXld A(d, d);
    for (int m = 1; m <= d; ++m) {
      for (int n = 1; n <= d; ++n) {
        A(m - 1, n - 1) = j == reference_vertex
                              ? static_cast<long double>(m * n) * centering_moment_ld(l, box.gamma, m + n - 2)
                              : centered_covariance_ld(l, box.gamma, m, n);
      }
    }
    out.emplace(j, std::move(A));
  }
  return out;
}

MatrixXld npc_matrix(const CenteringBox& box, int d, int reference_vertex, std::span<const Factor> span) {
  if (span.empty()) throw std::invalid_argument("empty clique span");
  for (const auto& f : span) {
    if (f.support() != box.clique) throw std::invalid_argument("span factor support differs from the clique");
    for (const auto& [var, deg] : f.terms()) {
      (void)var;
      if (deg > d) throw std::invalid_argument("span factor degree exceeds d");
    }
  }
  const auto A = build_A_matrices(box, d, reference_vertex);
  const auto s = static_cast<Eigen::Index>(span.size());
  MatrixXld M(s, s);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) {
      long double v = 1.0L;
      for (int j : box.clique) {
        v *= A.at(j)(span[static_cast<std::size_t>(a)].degree_of(j) - 1, span[static_cast<std::size_t>(b)].degree_of(j) - 1);
      }
      M(a, b) = v;
    }
  }
  return M;
}

long double min_eigenvalue(const MatrixXld& m) {
  const Eigen::SelfAdjointEigenSolver<MatrixXld> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

long double a_matrix_min_eigenvalue(std::int64_t l, std::int64_t gamma, int d, bool reference) {
  if (d < 1) throw std::invalid_argument("degree must be positive");
  if (gamma < 1) throw std::invalid_argument("gamma must be positive");
  // Row m of F expands m^[ref] x^{e_m} in powers of s = x - c, s = u / gamma.
  const int q0 = reference ? 0 : 1;
  const long double c = cell_center(l, gamma);
  const long double g = static_cast<long double>(gamma);
  MatrixXld S(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      S(a, b) = centered_uniform_moment(0.5L, 2 * q0 + a + b);
      if (!reference) S(a, b) -= centered_uniform_moment(0.5L, q0 + a) * centered_uniform_moment(0.5L, q0 + b);
    }
  }
  // F^{-1}: the inverse binomial shift is the shift by -c.
  MatrixXld Finv = MatrixXld::Zero(d, d);
  for (int a = 0; a < d; ++a) {
    for (int m = 0; m <= a; ++m) {
      const long double scale = reference ? static_cast<long double>(m + 1) : 1.0L;
      Finv(a, m) = ipow_ld(g, q0 + a) * binom(q0 + a, q0 + m) * ipow_ld(-c, a - m) / scale;
    }
  }
  const Eigen::LLT<MatrixXld> llt(S);
  const MatrixXld G = llt.matrixL().solve(Finv);
  const Eigen::JacobiSVD<MatrixXld> svd(G);
  const long double top = svd.singularValues()(0);
  return 1.0L / (top * top);
}

double npc_constant(const CenteringBox& box, int d, int reference_vertex, std::span<const Factor> span) {
  return static_cast<double>(min_eigenvalue(npc_matrix(box, d, reference_vertex, span)));
}

double centered_basis(const CenteringBox& box, int i, const Factor& factor, std::span<const double> x) {
  if (factor.support() != box.clique) throw std::invalid_argument("factor support differs from the box clique");
  const int ki = factor.degree_of(i);
  if (ki == 0) throw std::invalid_argument("reference vertex not in the factor");
  double out = ki * std::pow(x[static_cast<std::size_t>(i)], ki - 1);
  for (std::size_t a = 0; a < box.clique.size(); ++a) {
    const int j = box.clique[a];
    if (j == i) continue;
    const int kj = factor.degree_of(j);
    out *= std::pow(x[static_cast<std::size_t>(j)], kj) - centering_moment(box.offsets[a], box.gamma, kj);
  }
  return out;
}

double batch_npc_constant(const Model& model, int i, const Clique& clique, const SampleBatch& truncated,
                          const CurvatureCheckOptions& options, int* boxes_used) {
  const Family& fam = model.family();
  const auto span = clique_span(fam, clique);
  if (span.empty()) throw std::invalid_argument("clique has an empty span in the family");
  const int C_t = model.tail().C_t;
  const std::int64_t gamma = grid_gamma(fam.d(), C_t, model.B());
  const int rows = std::max(1, std::min(options.box_rows, truncated.M));
  std::map<std::vector<std::int64_t>, double> cache;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < rows; ++r) {
    const int m = static_cast<int>(static_cast<long long>(r) * truncated.M / rows);
    const CenteringBox box = locate_mode_box(model, clique, truncated.row(m), C_t, gamma, options.mode);
    auto [it, inserted] = cache.try_emplace(box.offsets, 0.0);
    if (inserted) it->second = npc_constant(box, fam.d(), i, span);
    best = std::min(best, it->second);
  }
  if (boxes_used) *boxes_used = static_cast<int>(cache.size());
  return best;
}

CurvatureReport mc_curvature_check(const Model& model, int i, const Clique& clique, const Eigen::VectorXd& delta,
                                   const SampleBatch& truncated, double B_npc, int min_samples) {
  const Family& fam = model.family();
  const auto& Ki = fam.factors_containing(i);
  if (delta.size() != static_cast<Eigen::Index>(Ki.size())) throw std::invalid_argument("delta must be indexed like K_i");
  if (truncated.M < min_samples) throw std::runtime_error("too few truncated samples for the curvature check");
  if (std::find(clique.begin(), clique.end(), i) == clique.end()) throw std::invalid_argument("vertex not in clique");
  CurvatureReport rep;
  rep.B_npc = B_npc;
  rep.C_p = B_npc / (std::numbers::e * std::pow(static_cast<double>(model.tail().C_t), fam.d()));
  for (std::size_t a = 0; a < Ki.size(); ++a) {
    if (fam.factor(Ki[a]).support() == clique) rep.span_norm_sq += delta[static_cast<Eigen::Index>(a)] * delta[static_cast<Eigen::Index>(a)];
  }
  rep.bound = rep.C_p * rep.span_norm_sq;
  std::vector<double> sq(static_cast<std::size_t>(truncated.M));
  for (int m = 0; m < truncated.M; ++m) {
    const double e = score_error_field(fam, i, Ki, delta, truncated.row(m));
    sq[static_cast<std::size_t>(m)] = e * e;
  }
  rep.samples = truncated.M;
  rep.mc_mean = mean(sq);
  rep.mc_stderr = batch_means_stderr(sq);
  rep.pass = rep.mc_mean + 3.0 * rep.mc_stderr >= rep.bound;
  return rep;
}

CurvatureReport mc_curvature_check(const Model& model, int i, const Clique& clique, const Eigen::VectorXd& delta,
                                   const SampleBatch& truncated, const CurvatureCheckOptions& options) {
  int boxes = 0;
  const double B_npc = batch_npc_constant(model, i, clique, truncated, options, &boxes);
  CurvatureReport rep = mc_curvature_check(model, i, clique, delta, truncated, B_npc, options.min_samples);
  rep.boxes = boxes;
  return rep;
}

VarianceCheck var_lower_bound_check(double eta, int d, double B_dom, int intervals) {
  if (!(eta > 0) || d < 1 || !(B_dom > 0)) throw std::invalid_argument("invalid variance-lemma parameters");
  UnivariateEnergy e;
  e.coefficients.assign(static_cast<std::size_t>(d) + 2, 0.0);
  e.coefficients[1] = eta;
  e.coefficients[static_cast<std::size_t>(d) + 1] = -1.0;
  const double shift = grid_max(e, -B_dom, B_dom, 4097);
  const auto mom = energy_moments(e, -B_dom, B_dom, intervals, shift);
  const double mu = mom[1] / mom[0];
  VarianceCheck out;
  out.variance = std::max(0.0, mom[2] / mom[0] - mu * mu);
  out.bound = 1.0 / (4.0 * std::numbers::e * std::numbers::e * eta * eta);
  out.pass = out.variance >= out.bound;
  return out;
}

RatioCheck ratio_lemma_check(const UnivariateEnergy& alpha, const UnivariateEnergy& beta, Interval support,
                             Interval region, int grid) {
  if (!(support.lo < support.hi) || region.lo < support.lo || region.hi > support.hi || !(region.lo < region.hi)) {
    throw std::invalid_argument("region must be a sub-interval of the support");
  }
  RatioCheck out;
  auto diff = [&](double t) { return alpha(t) - beta(t); };
  double min_in = std::numeric_limits<double>::infinity();
  double max_out = -std::numeric_limits<double>::infinity();
  for (int g = 0; g < grid; ++g) {
    const double t = support.lo + (support.hi - support.lo) * g / (grid - 1);
    if (t >= region.lo && t <= region.hi) {
      min_in = std::min(min_in, diff(t));
    } else {
      max_out = std::max(max_out, diff(t));
    }
  }
  out.hypothesis_holds = min_in >= max_out - 1e-12;
  auto prob = [&](const UnivariateEnergy& e) {
    const double shift = grid_max(e, support.lo, support.hi, grid);
    const double in = energy_moments(e, region.lo, region.hi, 1 << 14, shift)[0];
    const double below = region.lo > support.lo ? energy_moments(e, support.lo, region.lo, 1 << 14, shift)[0] : 0.0;
    const double above = region.hi < support.hi ? energy_moments(e, region.hi, support.hi, 1 << 14, shift)[0] : 0.0;
    return in / (in + below + above);
  };
  out.prob_alpha = prob(alpha);
  out.prob_beta = prob(beta);
  out.pass = !out.hypothesis_holds || out.prob_alpha >= out.prob_beta - 1e-12;
  return out;
}

double box_density_ratio(const Model& model, const CenteringBox& box, std::span<const double> x,
                         bool include_base_term, int points) {
  if (points < 2) throw std::invalid_argument("need at least two points per side");
  std::vector<double> state(x.begin(), x.end());
  const auto c = box.clique.size();
  std::size_t total = 1;
  for (std::size_t a = 0; a < c; ++a) total *= static_cast<std::size_t>(points);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t code = idx;
    for (std::size_t a = 0; a < c; ++a) {
      const auto g = static_cast<double>(code % static_cast<std::size_t>(points));
      code /= static_cast<std::size_t>(points);
      const double left = static_cast<double>(box.offsets[a]) / static_cast<double>(box.gamma);
      state[static_cast<std::size_t>(box.clique[a])] = left + g / ((points - 1) * static_cast<double>(box.gamma));
    }
    const double v = conditional_log_density(model, box.clique, state, include_base_term);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return std::exp(lo - hi);
}

nlohmann::json to_json(const CurvatureReport& r) {
  return {{"B_npc", r.B_npc},       {"C_p", r.C_p},       {"span_norm_sq", r.span_norm_sq},
          {"bound", r.bound},       {"mc_mean", r.mc_mean}, {"mc_stderr", r.mc_stderr},
          {"samples", r.samples},   {"boxes", r.boxes},   {"pass", r.pass}};
}

nlohmann::json to_json(const CenteringBox& box) {
  auto clique = nlohmann::json::array();
  for (int v : box.clique) clique.push_back(v + 1);
  return {{"clique", clique}, {"gamma", box.gamma}, {"offsets", box.offsets}, {"mode", box.mode}};
}

}  // namespace expfam
