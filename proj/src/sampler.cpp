#include "expfam/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "expfam/stats.hpp"
#include "grid_kernels.hpp"

namespace expfam {

namespace {

constexpr int kCoarsePoints = 257;

double ipow(double base, int exp) {
  double out = 1.0;
  for (int e = 0; e < exp; ++e) out *= base;
  return out;
}

// Smallest T (up to a factor 2) such that e(t) < e(0) - drop for all |t| >= T.
double support_radius(const UnivariateEnergy& e, double drop) {
  const int D = e.degree();
  const double lead = std::abs(e.coefficients[static_cast<std::size_t>(D)]);
  double rest = 0.0;
  for (int j = 1; j < D; ++j) rest += std::abs(e.coefficients[static_cast<std::size_t>(j)]);
  // For |t| >= 1: e(t) - e(0) <= -|t|^{D-1} (lead |t| - rest).
  double T = std::max(1.0, rest / lead);
  while (ipow(T, D - 1) * (lead * T - rest) < drop + 10.0) T *= 2.0;
  return T;
}

}  // namespace

double UnivariateEnergy::operator()(double t) const {
  double out = 0.0;
  for (std::size_t j = coefficients.size(); j-- > 0;) out = out * t + coefficients[j];
  return out;
}

double UnivariateEnergy::derivative(double t) const {
  double out = 0.0;
  for (std::size_t j = coefficients.size(); j-- > 1;) out = out * t + static_cast<double>(j) * coefficients[j];
  return out;
}

int UnivariateEnergy::degree() const {
  for (std::size_t j = coefficients.size(); j-- > 0;) {
    if (coefficients[j] != 0.0) return static_cast<int>(j);
  }
  return 0;
}

bool UnivariateEnergy::normalizable() const {
  const int D = degree();
  return D >= 2 && D % 2 == 0 && coefficients[static_cast<std::size_t>(D)] < 0.0;
}

UnivariateEnergy conditional_energy(const Model& model, int i, std::span<const double> x, bool include_base) {
  const Family& family = model.family();
  if (static_cast<int>(x.size()) != family.n()) throw std::invalid_argument("state has wrong dimension");
  const int p = family.base_exponent();
  UnivariateEnergy e;
  e.coefficients.assign(static_cast<std::size_t>(std::max(family.d(), p)) + 1, 0.0);
  for (int k : family.factors_containing(i)) {
    const double theta = model.theta_star()[static_cast<std::size_t>(k)];
    if (theta == 0.0) continue;
    double coef = theta;
    int deg_i = 0;
    for (const auto& [var, deg] : family.factor(k).terms()) {
      if (var == i) {
        deg_i = deg;
      } else {
        coef *= ipow(x[static_cast<std::size_t>(var)], deg);
      }
    }
    e.coefficients[static_cast<std::size_t>(deg_i)] += coef;
  }
  if (include_base && p > 0) e.coefficients[static_cast<std::size_t>(p)] -= 1.0;
  return e;
}

UnivariateSampler::UnivariateSampler(int grid_points, double log_density_drop)
    : grid_points_(grid_points), drop_(log_density_drop) {
  if (grid_points < 16) throw std::invalid_argument("grid needs at least 16 points");
  coarse_.resize(kCoarsePoints);
  cdf_.resize(static_cast<std::size_t>(grid_points));
}

void UnivariateSampler::build(const UnivariateEnergy& energy, std::optional<Interval> domain) {
  double a = 0;
  double b = 0;
  const bool normalizable = energy.normalizable();
  if (domain) {
    if (!std::isfinite(domain->lo) || !std::isfinite(domain->hi) || !(domain->lo < domain->hi)) {
      if (!normalizable) throw std::invalid_argument("energy is not normalizable on an unbounded domain");
    }
    a = domain->lo;
    b = domain->hi;
    if (normalizable) {
      const double T = support_radius(energy, drop_);
      if (std::max(a, -T) < std::min(b, T)) {
        a = std::max(a, -T);
        b = std::min(b, T);
      }
    }
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("empty sampling domain");
  } else {
    if (!normalizable) throw std::invalid_argument("energy is not normalizable on an unbounded domain");
    const double T = support_radius(energy, drop_);
    a = -T;
    b = T;
  }

  // Coarse pass: locate the mode and the region within `drop_` of it.
  const double coarse_step = (b - a) / (kCoarsePoints - 1);
  detail::eval_poly_grid(energy.coefficients, a, coarse_step, kCoarsePoints, coarse_.data());
  int imax = 0;
  for (int g = 1; g < kCoarsePoints; ++g) {
    if (coarse_[static_cast<std::size_t>(g)] > coarse_[static_cast<std::size_t>(imax)]) imax = g;
  }
  const double vmax = coarse_[static_cast<std::size_t>(imax)];
  if (!std::isfinite(vmax)) throw std::runtime_error("energy is not finite on the sampling grid");
  int ilo = imax;
  int ihi = imax;
  for (int g = 0; g < kCoarsePoints; ++g) {
    if (coarse_[static_cast<std::size_t>(g)] >= vmax - drop_) {
      ilo = std::min(ilo, g);
      ihi = std::max(ihi, g);
    }
  }
  ilo = std::max(ilo - 1, 0);
  ihi = std::min(ihi + 1, kCoarsePoints - 1);
  const double mode = a + imax * coarse_step;
  const double radius = std::max(mode - (a + ilo * coarse_step), (a + ihi * coarse_step) - mode);
  const double lo = std::max(a, mode - radius);
  const double hi = std::min(b, mode + radius);

  // Fine pass: trapezoid CDF of exp(e - max).
  const int G = grid_points_;
  lo_ = lo;
  step_ = (hi - lo) / (G - 1);
  double* v = cdf_.data();
  detail::eval_poly_grid(energy.coefficients, lo, step_, G, v);
  double emax = -std::numeric_limits<double>::infinity();
  for (int g = 0; g < G; ++g) emax = v[g] > emax ? v[g] : emax;
  if (!std::isfinite(emax)) throw std::runtime_error("energy is not finite on the sampling grid");
  for (int g = 0; g < G; ++g) v[g] = detail::exp_nonpositive(v[g] - emax);
  double prev = v[0];
  v[0] = 0.0;
  for (int g = 1; g < G; ++g) {
    const double w = v[g];
    v[g] = v[g - 1] + 0.5 * (prev + w);
    prev = w;
  }
  const double total = cdf_.back();
  if (!(total > 0) || !std::isfinite(total)) throw std::runtime_error("all grid mass underflowed");
}

double UnivariateSampler::quantile(const UnivariateEnergy& energy, std::optional<Interval> domain, double u) {
  build(energy, domain);
  const double target = u * cdf_.back();
  auto it = std::lower_bound(cdf_.begin() + 1, cdf_.end(), target);
  if (it == cdf_.end()) --it;
  const auto g = static_cast<std::size_t>(it - cdf_.begin());
  const double width = cdf_[g] - cdf_[g - 1];
  const double frac = width > 0 ? (target - cdf_[g - 1]) / width : 0.5;
  return lo_ + (static_cast<double>(g - 1) + std::clamp(frac, 0.0, 1.0)) * step_;
}

double UnivariateSampler::draw(const UnivariateEnergy& energy, std::optional<Interval> domain, Rng& rng) {
  return quantile(energy, domain, rng.uniform());
}

double sample_univariate(const UnivariateEnergy& energy, std::optional<Interval> domain, Rng& rng, int grid_points) {
  UnivariateSampler sampler(grid_points);
  return sampler.draw(energy, domain, rng);
}

std::vector<double> SampleBatch::column(int j) const {
  std::vector<double> out(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) out[static_cast<std::size_t>(m)] = row(m)[static_cast<std::size_t>(j)];
  return out;
}

SampleBatch draw_samples(const Model& model, int M, const SamplerOptions& options, Rng& rng) {
  if (M < 1) throw std::invalid_argument("need at least one sample");
  if (options.burn_in < 0 || options.thinning < 1) throw std::invalid_argument("invalid burn-in or thinning");
  const int n = model.family().n();
  SampleBatch batch;
  batch.n = n;
  batch.M = M;
  batch.data.reserve(static_cast<std::size_t>(M) * static_cast<std::size_t>(n));
  batch.provenance = {rng.seed(), options.burn_in, options.thinning, options.grid_points};

  UnivariateSampler sampler(options.grid_points);
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  auto sweep = [&] {
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = sampler.draw(conditional_energy(model, i, x), std::nullopt, rng);
    }
  };
  for (int s = 0; s < options.burn_in; ++s) sweep();
  for (int m = 0; m < M; ++m) {
    for (int s = 0; s < options.thinning; ++s) sweep();
    batch.data.insert(batch.data.end(), x.begin(), x.end());
  }
  return batch;
}

SampleBatch draw_samples(const Model& model, int M, const SamplerOptions& options, std::uint64_t seed) {
  Rng rng(seed);
  return draw_samples(model, M, options, rng);
}

double tail_exceedance(const SampleBatch& batch, double s) {
  int count = 0;
  for (int m = 0; m < batch.M; ++m) {
    const auto r = batch.row(m);
    const bool exceeds = std::any_of(r.begin(), r.end(), [s](double v) { return std::abs(v) > s; });
    count += exceeds ? 1 : 0;
  }
  return static_cast<double>(count) / batch.M;
}

SampleBatch truncate_to_box(const SampleBatch& batch, double C_t) {
  SampleBatch out;
  out.n = batch.n;
  out.provenance = batch.provenance;
  for (int m = 0; m < batch.M; ++m) {
    const auto r = batch.row(m);
    if (std::all_of(r.begin(), r.end(), [C_t](double v) { return std::abs(v) <= C_t; })) {
      out.data.insert(out.data.end(), r.begin(), r.end());
      ++out.M;
    }
  }
  if (out.M == 0) throw std::runtime_error("no samples inside the box; C_t too small");
  return out;
}

void write_csv(std::ostream& os, const SampleBatch& batch) {
  for (int j = 0; j < batch.n; ++j) os << (j ? "," : "") << 'x' << (j + 1);
  os << '\n';
  os << std::setprecision(17);
  for (int m = 0; m < batch.M; ++m) {
    const auto r = batch.row(m);
    for (int j = 0; j < batch.n; ++j) os << (j ? "," : "") << r[static_cast<std::size_t>(j)];
    os << '\n';
  }
}

SampleBatch read_csv(std::istream& is) {
  SampleBatch batch;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty sample file");
  batch.n = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (!std::isfinite(v)) throw std::runtime_error("non-finite sample value");
      batch.data.push_back(v);
      ++cols;
    }
    if (cols != batch.n) throw std::runtime_error("ragged sample row");
    ++batch.M;
  }
  if (batch.M < 1) throw std::runtime_error("sample file has no rows");
  return batch;
}

void write_batch(const std::string& csv_path, const SampleBatch& batch) {
  std::ofstream os(csv_path);
  if (!os) throw std::runtime_error("cannot write " + csv_path);
  write_csv(os, batch);

  nlohmann::json side;
  side["n"] = batch.n;
  side["M"] = batch.M;
  side["seed"] = batch.provenance.seed;
  side["burn_in"] = batch.provenance.burn_in;
  side["thinning"] = batch.provenance.thinning;
  side["grid_points"] = batch.provenance.grid_points;
  auto& ess = side["effective_sample_size"] = nlohmann::json::array();
  for (int j = 0; j < batch.n; ++j) ess.push_back(effective_sample_size(batch.column(j)));
  std::ofstream js(csv_path + ".json");
  js << side.dump(2) << '\n';
}

SampleBatch read_batch(const std::string& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw std::runtime_error("cannot read " + csv_path);
  SampleBatch batch = read_csv(is);
  std::ifstream js(csv_path + ".json");
  if (js) {
    const auto side = nlohmann::json::parse(js);
    batch.provenance.seed = side.value("seed", std::uint64_t{0});
    batch.provenance.burn_in = side.value("burn_in", 0);
    batch.provenance.thinning = side.value("thinning", 0);
    batch.provenance.grid_points = side.value("grid_points", 0);
  }
  return batch;
}

}  // namespace expfam
