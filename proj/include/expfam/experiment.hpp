#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "expfam/family.hpp"
#include "expfam/model_io.hpp"
#include "expfam/qp_solver.hpp"
#include "expfam/sampler.hpp"
#include "expfam/stats.hpp"

namespace expfam {

enum class Scenario {
  Neighborhood,      // per-vertex fits, errors on maximal factors of the family
  Algorithm1,        // iterative clique pruning, structure and maximal-factor errors
  MultilinearTotal,  // per-vertex fits, errors on every factor of every K_i
};

Scenario scenario_from_string(const std::string& s);
std::string to_string(Scenario s);

/// Random model: all monomials of the given shape; each factor is nonzero
/// with probability `sparsity`, with magnitude uniform on the weight range and
/// a random sign. Groups over B are scaled down to B.
struct GeneratorSpec {
  int n = 3;
  int d = 2;
  int w = 2;
  int base_exponent = 4;
  bool multilinear = false;
  double sparsity = 1.0;
  double weight_lo = 0.1;
  double weight_hi = 0.5;
  int B = 1;
  TailSpec tail{1.0, 0};  // C_t = 0 selects n B + 1
  std::uint64_t seed = 1;
};

Model generate_model(const GeneratorSpec& spec);

struct ExperimentConfig {
  std::string id = "sweep";
  Scenario scenario = Scenario::Neighborhood;
  std::optional<Model> model;
  std::optional<GeneratorSpec> generator;
  std::vector<int> M_grid;
  int trials = 1;
  double eps = 0.04;
  double rho = 1.0;
  std::optional<int> B;  // solver bound; defaults to the model's B
  std::uint64_t seed = 0;
  SolverOptions solver;
  SamplerOptions sampler;
  std::optional<double> tau;
  bool signed_threshold = false;
  bool record_wall_time = false;
  std::string sweep_csv = "sweep.csv";
  std::string report_json = "report.json";
  nlohmann::json checks = nlohmann::json::object();

  /// The explicit model, or the generated one.
  Model resolve_model() const;
  int solver_bound() const;
};

/// Throws ConfigError on a malformed document or violated invariant.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

struct SweepRow {
  std::string scenario;
  int n = 0;
  int d = 0;
  int w = 0;
  int M = 0;
  int trial = 0;
  double max_sq_error = 0.0;
  std::optional<bool> structure_exact;  // absent when the scenario has no structure target
  double eta_bound = 0.0;
  double wall_time_ms = 0.0;
  double min_ess = 0.0;  // smallest per-coordinate effective sample size
};

/// One row per (M, trial); the sample seed of grid point m and trial t is
/// master XOR (m * trials + t). Rows are independent of the thread count.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);

/// Runs one row; exposed for tests and the acceptance suite.
SweepRow run_trial(const ExperimentConfig& config, const Model& model, int M, int trial, std::uint64_t seed);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& is);

struct SuccessPoint {
  int M = 0;
  int trials = 0;
  int successes = 0;
  double rate = 0.0;
  Interval95 interval;
};

/// Success means max_sq_error <= eps and, where recorded, an exact structure.
std::vector<SuccessPoint> success_rate(std::span<const SweepRow> rows, double eps);

struct MedianPoint {
  int M = 0;
  double median_max_sq_error = 0.0;
};
std::vector<MedianPoint> median_errors(std::span<const SweepRow> rows);

/// Least-squares slope of log(error^2) against log(M); needs >= 3 points.
double fit_scaling_slope(std::span<const std::pair<double, double>> points);

/// Success curve, medians, slope (when >= 3 grid points) and config echo.
nlohmann::json build_report(const ExperimentConfig& config, std::span<const SweepRow> rows);

struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Evaluates config.checks against the rows. Supported keys:
/// median_decreasing (bool), slope_range ([lo, hi]), min_success_rate
/// ({"M": m, "rate": r}).
std::vector<CheckOutcome> evaluate_checks(const ExperimentConfig& config, std::span<const SweepRow> rows);

extern const char* const kToolVersion;

}  // namespace expfam
