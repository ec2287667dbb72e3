#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "expfam/factor_graph.hpp"
#include "expfam/family.hpp"
#include "expfam/sampler.hpp"

namespace expfam {

using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

/// d^2 C_t^{2d} B. Throws std::overflow_error past int64.
std::int64_t grid_gamma(int d, int C_t, int B);

/// Uniform distribution q on the box prod_j [l_j/gamma, (l_j+1)/gamma]
/// around the conditional mode of the clique.
struct CenteringBox {
  Clique clique;
  std::int64_t gamma = 1;
  std::vector<std::int64_t> offsets;  // aligned with clique
  std::vector<double> mode;           // aligned with clique

  std::int64_t offset_of(int var) const;
};

struct ModeSearchOptions {
  bool include_base_term = true;
  /// Grid step is 1 / (steps_per_cell * gamma).
  int steps_per_cell = 4;
};

/// Maximizes the conditional log-density of x_c given the other coordinates
/// of x over [-C_t, C_t]^|c| and returns the grid cell containing the mode.
/// Only the coordinates outside the clique are read from x.
CenteringBox locate_mode_box(const Model& model, const Clique& clique, std::span<const double> x, int C_t,
                             std::int64_t gamma, const ModeSearchOptions& options = {});

/// E[x^m] for x uniform on [l/gamma, (l+1)/gamma].
long double centering_moment_ld(std::int64_t l, std::int64_t gamma, int m);
double centering_moment(std::int64_t l, std::int64_t gamma, int m);

/// Centered second moment E[(x^m - E x^m)(x^n - E x^n)] for m, n >= 1.
long double centered_covariance_ld(std::int64_t l, std::int64_t gamma, int m, int n);

/// d x d matrices indexed by degrees 1..d: the covariance matrix of
/// (x, ..., x^d) for j != i, and m n E[x^{m+n-2}] for the reference vertex,
/// so that E_q[h_k h_k'] = prod_j A^j_{k_j, k'_j}.
std::map<int, MatrixXld> build_A_matrices(const CenteringBox& box, int d, int reference_vertex);

/// M_{k,k'} = prod_{j in c} A^j_{k_j, k'_j} over the span factors.
MatrixXld npc_matrix(const CenteringBox& box, int d, int reference_vertex, std::span<const Factor> span);

/// lambda_min of npc_matrix. Throws std::invalid_argument on an empty span
/// or a factor whose support is not the box clique.
double npc_constant(const CenteringBox& box, int d, int reference_vertex, std::span<const Factor> span);

long double min_eigenvalue(const MatrixXld& m);

/// lambda_min of the A matrix of cell l (reference or not), from the
/// factorization A = F S F^T with S the moment matrix of the unit cell and F
/// an explicit binomial shift scaled by powers of 1/gamma. Keeps full relative
/// accuracy when gamma is large and A is too ill-conditioned for a direct
/// eigensolve.
long double a_matrix_min_eigenvalue(std::int64_t l, std::int64_t gamma, int d, bool reference);

/// h_{i,k}(x) = k_i x_i^{k_i-1} prod_{j in c \ i} (x_j^{k_j} - E_q[x_j^{k_j}]).
double centered_basis(const CenteringBox& box, int i, const Factor& factor, std::span<const double> x);

struct CurvatureReport {
  double B_npc = 0.0;
  double C_p = 0.0;
  double span_norm_sq = 0.0;  // sum of delta_k^2 over the clique span
  double bound = 0.0;
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  int samples = 0;
  int boxes = 0;
  bool pass = false;
};

struct CurvatureCheckOptions {
  ModeSearchOptions mode;
  /// Number of rows whose boxes enter the minimum defining B_NPC.
  int box_rows = 32;
  int min_samples = 1000;
};

/// Compares the Monte-Carlo mean of E_i(x, delta)^2 over a truncated batch
/// with (B_NPC / (e C_t^d)) sum_{k in span} delta_k^2, where B_NPC is the
/// smallest NPC constant over the mode boxes of evenly spaced rows. delta is
/// indexed like K_i. Pass means mean + 3 stderr >= bound.
CurvatureReport mc_curvature_check(const Model& model, int i, const Clique& clique, const Eigen::VectorXd& delta,
                                   const SampleBatch& truncated, const CurvatureCheckOptions& options = {});

/// Same, with a precomputed B_NPC.
CurvatureReport mc_curvature_check(const Model& model, int i, const Clique& clique, const Eigen::VectorXd& delta,
                                   const SampleBatch& truncated, double B_npc, int min_samples = 1000);

/// Smallest B_NPC over the mode boxes of evenly spaced rows of the batch.
double batch_npc_constant(const Model& model, int i, const Clique& clique, const SampleBatch& truncated,
                          const CurvatureCheckOptions& options = {}, int* boxes_used = nullptr);

struct VarianceCheck {
  double variance = 0.0;
  double bound = 0.0;
  bool pass = false;
};

/// Variance of x ∝ exp(eta x - x^{d+1}) on [-B_dom, B_dom] by composite
/// Simpson quadrature against 1 / (4 e^2 eta^2).
VarianceCheck var_lower_bound_check(double eta, int d, double B_dom, int intervals = 1 << 15);

struct RatioCheck {
  double prob_alpha = 0.0;
  double prob_beta = 0.0;
  bool hypothesis_holds = false;
  bool pass = false;
};

/// Ratio comparison for densities ∝ exp(alpha(t)), exp(beta(t)) on `support`
/// with A = `region` (a sub-interval). The likelihood-ratio hypothesis is
/// verified on a grid; pass means the hypothesis fails or P_alpha(A) >= P_beta(A).
RatioCheck ratio_lemma_check(const UnivariateEnergy& alpha, const UnivariateEnergy& beta, Interval support,
                             Interval region, int grid = 2001);

/// min / max of the conditional density of x_c over the box, on a tensor grid
/// with `points` nodes per side.
double box_density_ratio(const Model& model, const CenteringBox& box, std::span<const double> x,
                         bool include_base_term = true, int points = 33);

nlohmann::json to_json(const CurvatureReport& report);
nlohmann::json to_json(const CenteringBox& box);

}  // namespace expfam
