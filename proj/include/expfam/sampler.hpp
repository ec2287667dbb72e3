#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "expfam/family.hpp"
#include "expfam/rng.hpp"

namespace expfam {

/// Energy polynomial e(t) = sum_j coefficients[j] t^j; the 1-D conditional
/// density is proportional to exp(e(t)).
struct UnivariateEnergy {
  std::vector<double> coefficients;

  double operator()(double t) const;
  double derivative(double t) const;
  int degree() const;
  /// Leading even degree with a negative coefficient.
  bool normalizable() const;
};

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// Conditional energy of x_i given the other coordinates of x. The base
/// measure term -t^p is included unless include_base is false.
UnivariateEnergy conditional_energy(const Model& model, int i, std::span<const double> x, bool include_base = true);

/// Grid inverse-CDF sampler for a univariate polynomial energy. Keeps its
/// scratch buffers between draws; one instance per thread.
class UnivariateSampler {
 public:
  explicit UnivariateSampler(int grid_points = 4096, double log_density_drop = 50.0);

  /// One draw on `domain` (or on the energy's effective support when absent).
  /// Throws std::invalid_argument for a non-normalizable energy without a
  /// domain and std::runtime_error when all grid mass underflows.
  double draw(const UnivariateEnergy& energy, std::optional<Interval> domain, Rng& rng);

  /// Inverse CDF at probability u for the same grid construction; draw() is
  /// quantile(uniform).
  double quantile(const UnivariateEnergy& energy, std::optional<Interval> domain, double u);

 private:
  void build(const UnivariateEnergy& energy, std::optional<Interval> domain);

  int grid_points_;
  double drop_;
  double lo_ = 0;
  double step_ = 0;
  std::vector<double> coarse_;
  std::vector<double> cdf_;
};

double sample_univariate(const UnivariateEnergy& energy, std::optional<Interval> domain, Rng& rng,
                         int grid_points = 4096);

struct SamplerOptions {
  int grid_points = 4096;
  int burn_in = 1000;
  int thinning = 10;
};

struct SampleProvenance {
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thinning = 0;
  int grid_points = 0;
};

/// M rows of n coordinates, row-major.
struct SampleBatch {
  int n = 0;
  int M = 0;
  std::vector<double> data;
  SampleProvenance provenance;

  std::span<const double> row(int m) const {
    return {data.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
  }
  std::vector<double> column(int j) const;
};

/// Systematic-scan Gibbs sampler started at the origin.
SampleBatch draw_samples(const Model& model, int M, const SamplerOptions& options, Rng& rng);
SampleBatch draw_samples(const Model& model, int M, const SamplerOptions& options, std::uint64_t seed);

/// Fraction of rows with |x|_inf > s.
double tail_exceedance(const SampleBatch& batch, double s);

/// Rows with |x|_inf <= C_t. Throws std::runtime_error when nothing survives.
SampleBatch truncate_to_box(const SampleBatch& batch, double C_t);

void write_csv(std::ostream& os, const SampleBatch& batch);
SampleBatch read_csv(std::istream& is);
void write_batch(const std::string& csv_path, const SampleBatch& batch);
SampleBatch read_batch(const std::string& csv_path);

}  // namespace expfam
