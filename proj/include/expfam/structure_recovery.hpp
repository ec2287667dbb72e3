#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "expfam/factor_graph.hpp"
#include "expfam/family.hpp"
#include "expfam/qp_solver.hpp"
#include "expfam/sampler.hpp"
#include "expfam/score_matching.hpp"

namespace expfam {

/// Produces the local quadratic of a vertex restricted to the kept factors
/// (all factors when kept is empty).
using QuadraticSource = std::function<LocalQuadratic(int vertex, std::span<const int> kept)>;

QuadraticSource batch_source(const Family& family, const SampleBatch& batch);

struct NeighborhoodEstimate {
  int vertex = 0;
  std::vector<int> active;
  SolveResult solve;

  /// Estimate for a family factor index, or nullopt if it is not active.
  std::optional<double> estimate(int factor) const;
};

NeighborhoodEstimate learn_neighborhood(const Family& family, int i, const QuadraticSource& source, double B,
                                        const SolverOptions& solver = {}, std::span<const int> kept = {});
NeighborhoodEstimate learn_neighborhood(const Family& family, int i, const SampleBatch& batch, double B,
                                        const SolverOptions& solver = {});

/// Per-vertex estimates together with the maximal structure of the full
/// factor graph; maximal[i] maps each maximal factor containing i to its
/// estimate from vertex i.
struct FamilyEstimate {
  std::vector<NeighborhoodEstimate> vertices;
  StructureSet structure;
  std::vector<std::map<int, double>> maximal;
};

FamilyEstimate recover_family_structure(const Family& family, const QuadraticSource& source, double B,
                                        const SolverOptions& solver = {});
FamilyEstimate recover_family_structure(const Family& family, const SampleBatch& batch, double B,
                                        const SolverOptions& solver = {});

struct Algorithm1Options {
  double eps = 0.04;
  /// Pruning threshold; defaults to sqrt(eps).
  std::optional<double> tau;
  /// Compare the signed estimate instead of its magnitude.
  bool signed_threshold = false;
  SolverOptions solver;

  double threshold() const;
};

struct IterationLog {
  int s = 0;
  std::vector<int> kept;              // K^s
  std::vector<Clique> cliques;        // M_cli(G^s)
  std::vector<Clique> pruned_cliques;
  std::vector<int> pruned_factors;    // N^s
};

struct RecoveryReport {
  StructureSet structure;                      // S-hat with spans in G^w
  std::vector<NeighborhoodEstimate> estimates; // final per-vertex solves
  std::vector<IterationLog> iterations;
  double threshold = 0.0;
  double max_eta_bound = 0.0;
};

/// Iterative clique pruning for s = 0..w on one set of quadratics.
RecoveryReport algorithm1(const Family& family, const QuadraticSource& source, double B,
                          const Algorithm1Options& options);
RecoveryReport algorithm1(const Family& family, const SampleBatch& batch, double B, const Algorithm1Options& options);

struct FactorError {
  int vertex = 0;
  int factor = 0;
  double estimate = 0.0;
  double truth = 0.0;
  double sq_error = 0.0;
};

/// Errors of every (vertex, factor) pair in the given estimates, optionally
/// restricted to a factor subset.
std::vector<FactorError> factor_errors(const std::vector<NeighborhoodEstimate>& estimates,
                                       std::span<const double> theta_star,
                                       std::optional<std::span<const int>> only = std::nullopt);
double max_sq_error(const std::vector<FactorError>& errors);

struct StructureDiff {
  std::vector<Clique> missing;
  std::vector<Clique> spurious;
  bool exact = false;
};

StructureDiff structure_diff(std::span<const Clique> estimated, std::span<const Clique> truth);

/// Cliques as sorted 1-based variable lists.
nlohmann::json to_json(const RecoveryReport& report, const Family& family,
                       std::optional<std::span<const double>> theta_star = std::nullopt);

}  // namespace expfam
