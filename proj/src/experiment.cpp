#include "expfam/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "expfam/factor_graph.hpp"
#include "expfam/rng.hpp"
#include "expfam/structure_recovery.hpp"

namespace expfam {

const char* const kToolVersion = "0.1.0";

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

GeneratorSpec generator_from_json(const nlohmann::json& j) {
  GeneratorSpec g;
  g.n = get_or(j, "n", g.n);
  g.d = get_or(j, "d", g.d);
  g.w = get_or(j, "w", g.w);
  g.base_exponent = get_or(j, "base_exponent", g.base_exponent);
  g.multilinear = get_or(j, "multilinear", g.multilinear);
  g.sparsity = get_or(j, "sparsity", g.sparsity);
  if (j.contains("weight_range")) {
    const auto r = j.at("weight_range").get<std::vector<double>>();
    if (r.size() != 2 || !(r[0] <= r[1])) throw ConfigError("weight_range must be [lo, hi]");
    g.weight_lo = r[0];
    g.weight_hi = r[1];
  }
  g.B = get_or(j, "B", g.B);
  if (j.contains("tail")) {
    g.tail.decay = get_or(j.at("tail"), "k", g.tail.decay);
    g.tail.C_t = get_or(j.at("tail"), "C_t", g.tail.C_t);
  }
  g.seed = get_or<std::uint64_t>(j, "seed", g.seed);
  if (g.sparsity < 0 || g.sparsity > 1) throw ConfigError("sparsity must lie in [0, 1]");
  return g;
}

nlohmann::json to_json(const GeneratorSpec& g) {
  return {{"n", g.n},
          {"d", g.d},
          {"w", g.w},
          {"base_exponent", g.base_exponent},
          {"multilinear", g.multilinear},
          {"sparsity", g.sparsity},
          {"weight_range", {g.weight_lo, g.weight_hi}},
          {"B", g.B},
          {"tail", {{"k", g.tail.decay}, {"C_t", g.tail.C_t}}},
          {"seed", g.seed}};
}

std::vector<int> maximal_factor_list(const Family& family) {
  return maximal_structure(build_factor_graph(family)).maximal_factors;
}

double max_eta(const std::vector<NeighborhoodEstimate>& est) {
  double m = 0.0;
  for (const auto& e : est) m = std::max(m, e.solve.eta_bound);
  return m;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Scenario scenario_from_string(const std::string& s) {
  if (s == "neighborhood") return Scenario::Neighborhood;
  if (s == "algorithm1") return Scenario::Algorithm1;
  if (s == "multilinear_total") return Scenario::MultilinearTotal;
  throw ConfigError("unknown scenario '" + s + "'");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Neighborhood: return "neighborhood";
    case Scenario::Algorithm1: return "algorithm1";
    case Scenario::MultilinearTotal: return "multilinear_total";
  }
  return "unknown";
}

Model generate_model(const GeneratorSpec& spec) {
  Family fam = Family::all_monomials(spec.n, spec.d, spec.w, spec.base_exponent, spec.multilinear);
  Rng rng(spec.seed);
  std::vector<double> theta(fam.size(), 0.0);
  for (auto& t : theta) {
    const bool on = rng.uniform() < spec.sparsity;
    const double mag = rng.uniform(spec.weight_lo, spec.weight_hi);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    if (on) t = sign * mag;
  }
  const auto g = group_l1_norms(fam, theta);
  const double worst = *std::max_element(g.begin(), g.end());
  if (worst > spec.B) {
    for (auto& t : theta) t *= spec.B / worst;
  }
  TailSpec tail = spec.tail;
  if (tail.C_t == 0) tail.C_t = spec.n * spec.B + 1;
  return Model(std::move(fam), std::move(theta), spec.B, tail);
}

Model ExperimentConfig::resolve_model() const {
  if (model) return *model;
  if (generator) return generate_model(*generator);
  throw ConfigError("config needs a model or a generator");
}

int ExperimentConfig::solver_bound() const { return B ? *B : resolve_model().B(); }

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.id = get_or<std::string>(j, "id", c.id);
  c.scenario = scenario_from_string(get_or<std::string>(j, "scenario", "neighborhood"));
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("generator")) c.generator = generator_from_json(j.at("generator"));
  if (c.model.has_value() == c.generator.has_value()) throw ConfigError("config needs exactly one of model, generator");
  if (!j.contains("M_grid")) throw ConfigError("missing M_grid");
  c.M_grid = get_or(j, "M_grid", std::vector<int>{});
  if (c.M_grid.empty()) throw ConfigError("M_grid is empty");
  for (std::size_t a = 0; a < c.M_grid.size(); ++a) {
    if (c.M_grid[a] < 1) throw ConfigError("M_grid entries must be positive");
    if (a > 0 && c.M_grid[a] <= c.M_grid[a - 1]) throw ConfigError("M_grid must be strictly ascending");
  }
  c.trials = get_or(j, "trials", c.trials);
  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  c.eps = get_or(j, "eps", c.eps);
  if (!(c.eps > 0) || c.eps > 1) throw ConfigError("eps must lie in (0, 1]");
  c.rho = get_or(j, "rho", c.rho);
  if (!(c.rho >= 1)) throw ConfigError("rho must be at least 1");
  if (j.contains("B")) {
    const auto& b = j.at("B");
    if (!b.is_number_integer() || b.get<int>() < 1) throw ConfigError("B must be a positive integer");
    c.B = b.get<int>();
  }
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    c.solver.tol = get_or(s, "tol", c.solver.tol);
    c.solver.tol_scale = get_or(s, "tol_scale", c.solver.tol_scale);
    c.solver.max_iter = get_or(s, "max_iter", c.solver.max_iter);
    c.solver.certify = get_or(s, "certify", c.solver.certify);
    if (c.solver.tol < 0 || !(c.solver.tol_scale > 0) || c.solver.max_iter < 0) throw ConfigError("invalid solver settings");
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    c.sampler.grid_points = get_or(s, "grid_points", c.sampler.grid_points);
    c.sampler.burn_in = get_or(s, "burn_in", c.sampler.burn_in);
    c.sampler.thinning = get_or(s, "thinning", c.sampler.thinning);
    if (c.sampler.grid_points < 16 || c.sampler.burn_in < 0 || c.sampler.thinning < 1) {
      throw ConfigError("invalid sampler settings");
    }
  }
  if (j.contains("threshold")) {
    const auto& t = j.at("threshold");
    if (t.contains("tau") && !t.at("tau").is_null()) c.tau = get_or(t, "tau", 0.0);
    c.signed_threshold = get_or(t, "signed", c.signed_threshold);
  }
  c.record_wall_time = get_or(j, "record_wall_time", c.record_wall_time);
  if (j.contains("outputs")) {
    c.sweep_csv = get_or<std::string>(j.at("outputs"), "sweep_csv", c.sweep_csv);
    c.report_json = get_or<std::string>(j.at("outputs"), "report_json", c.report_json);
  }
  if (j.contains("checks")) c.checks = j.at("checks");
  // Surface generator/model errors as config errors.
  try {
    (void)c.resolve_model();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["id"] = c.id;
  j["scenario"] = to_string(c.scenario);
  if (c.model) j["model"] = to_json(*c.model);
  if (c.generator) j["generator"] = to_json(*c.generator);
  j["M_grid"] = c.M_grid;
  j["trials"] = c.trials;
  j["eps"] = c.eps;
  j["rho"] = c.rho;
  if (c.B) j["B"] = *c.B;
  j["seed"] = c.seed;
  j["solver"] = {{"tol", c.solver.tol}, {"tol_scale", c.solver.tol_scale}, {"max_iter", c.solver.max_iter},
                 {"certify", c.solver.certify}};
  j["sampler"] = {{"grid_points", c.sampler.grid_points}, {"burn_in", c.sampler.burn_in},
                  {"thinning", c.sampler.thinning}};
  j["threshold"] = {{"tau", c.tau ? nlohmann::json(*c.tau) : nlohmann::json(nullptr)}, {"signed", c.signed_threshold}};
  j["record_wall_time"] = c.record_wall_time;
  j["outputs"] = {{"sweep_csv", c.sweep_csv}, {"report_json", c.report_json}};
  j["checks"] = c.checks;
  return j;
}

SweepRow run_trial(const ExperimentConfig& config, const Model& model, int M, int trial, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const Family& fam = model.family();
  const SampleBatch batch = draw_samples(model, M, config.sampler, seed);
  const double B = config.B ? *config.B : model.B();
  const auto& truth = model.theta_star();

  SweepRow row;
  row.scenario = config.id;
  row.n = fam.n();
  row.d = fam.d();
  row.w = fam.w();
  row.M = M;
  row.trial = trial;
  switch (config.scenario) {
    case Scenario::Neighborhood: {
      const auto est = recover_family_structure(fam, batch, B, config.solver);
      const auto targets = maximal_factor_list(fam);
      row.max_sq_error = max_sq_error(factor_errors(est.vertices, truth, std::span<const int>(targets)));
      row.eta_bound = max_eta(est.vertices);
      break;
    }
    case Scenario::Algorithm1: {
      Algorithm1Options opts;
      opts.eps = config.eps;
      opts.tau = config.tau;
      opts.signed_threshold = config.signed_threshold;
      opts.solver = config.solver;
      const auto rep = algorithm1(fam, batch, B, opts);
      const auto targets = rep.structure.maximal_factors;
      row.max_sq_error = max_sq_error(factor_errors(rep.estimates, truth, std::span<const int>(targets)));
      row.structure_exact = structure_diff(rep.structure.cliques, model_structure(model)).exact;
      row.eta_bound = rep.max_eta_bound;
      break;
    }
    case Scenario::MultilinearTotal: {
      const auto est = recover_family_structure(fam, batch, B, config.solver);
      row.max_sq_error = max_sq_error(factor_errors(est.vertices, truth));
      row.eta_bound = max_eta(est.vertices);
      break;
    }
  }
  row.min_ess = static_cast<double>(M);
  for (int j = 0; j < fam.n(); ++j) row.min_ess = std::min(row.min_ess, effective_sample_size(batch.column(j)));
  if (config.record_wall_time) {
    row.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  const Model model = config.resolve_model();
  const int grid = static_cast<int>(config.M_grid.size());
  const int total = grid * config.trials;
  std::vector<SweepRow> rows(static_cast<std::size_t>(total));
  std::vector<std::exception_ptr> errors(rows.size());
#pragma omp parallel for schedule(dynamic)
  for (int g = 0; g < total; ++g) {
    const int m = g / config.trials;
    const int t = g % config.trials;
    try {
      rows[static_cast<std::size_t>(g)] =
          run_trial(config, model, config.M_grid[static_cast<std::size_t>(m)], t,
                    trial_seed(config.seed, static_cast<std::uint64_t>(g)));
    } catch (...) {
      errors[static_cast<std::size_t>(g)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "scenario,n,d,w,M,trial,max_sq_error,structure_exact,eta_bound,wall_time_ms\n";
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.n << ',' << r.d << ',' << r.w << ',' << r.M << ',' << r.trial << ','
       << format_double(r.max_sq_error) << ',' << (r.structure_exact ? (*r.structure_exact ? "1" : "0") : "NA") << ','
       << format_double(r.eta_bound) << ',' << format_double(r.wall_time_ms) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty sweep file");
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw std::runtime_error("sweep row has " + std::to_string(cells.size()) + " fields");
    SweepRow r;
    r.scenario = cells[0];
    r.n = std::stoi(cells[1]);
    r.d = std::stoi(cells[2]);
    r.w = std::stoi(cells[3]);
    r.M = std::stoi(cells[4]);
    r.trial = std::stoi(cells[5]);
    r.max_sq_error = std::stod(cells[6]);
    if (cells[7] != "NA") r.structure_exact = cells[7] == "1";
    r.eta_bound = std::stod(cells[8]);
    r.wall_time_ms = std::stod(cells[9]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<SuccessPoint> success_rate(std::span<const SweepRow> rows, double eps) {
  std::map<int, SuccessPoint> by_m;
  for (const auto& r : rows) {
    auto& p = by_m[r.M];
    p.M = r.M;
    ++p.trials;
    const bool ok = r.max_sq_error <= eps && r.structure_exact.value_or(true);
    if (ok) ++p.successes;
  }
  std::vector<SuccessPoint> out;
  for (auto& [m, p] : by_m) {
    p.rate = static_cast<double>(p.successes) / p.trials;
    p.interval = wilson_interval(p.successes, p.trials);
    out.push_back(p);
  }
  return out;
}

std::vector<MedianPoint> median_errors(std::span<const SweepRow> rows) {
  std::map<int, std::vector<double>> by_m;
  for (const auto& r : rows) by_m[r.M].push_back(r.max_sq_error);
  std::vector<MedianPoint> out;
  for (const auto& [m, v] : by_m) out.push_back({m, median(v)});
  return out;
}

double fit_scaling_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("scaling fit needs at least three points");
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [m, e] : points) {
    x.push_back(m);
    y.push_back(e);
  }
  return log_log_slope(x, y);
}

nlohmann::json build_report(const ExperimentConfig& config, std::span<const SweepRow> rows) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["config"] = to_json(config);
  j["rows"] = rows.size();
  auto& curve = j["success_curve"] = nlohmann::json::array();
  for (const auto& p : success_rate(rows, config.eps)) {
    curve.push_back({{"M", p.M},
                     {"trials", p.trials},
                     {"successes", p.successes},
                     {"rate", p.rate},
                     {"wilson95", {p.interval.lo, p.interval.hi}}});
  }
  const auto med = median_errors(rows);
  auto& medians = j["median_max_sq_error"] = nlohmann::json::array();
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : med) {
    medians.push_back({{"M", p.M}, {"median", p.median_max_sq_error}});
    if (p.median_max_sq_error > 0) pts.emplace_back(p.M, p.median_max_sq_error);
  }
  j["scaling_slope"] = pts.size() >= 3 ? nlohmann::json(fit_scaling_slope(pts)) : nlohmann::json(nullptr);
  std::map<int, double> ess;
  for (const auto& r : rows) {
    auto it = ess.find(r.M);
    if (it == ess.end() || r.min_ess < it->second) ess[r.M] = r.min_ess;
  }
  auto& e = j["min_effective_sample_size"] = nlohmann::json::array();
  for (const auto& [m, v] : ess) e.push_back({{"M", m}, {"ess", v}});
  double worst_eta = 0.0;
  for (const auto& r : rows) worst_eta = std::max(worst_eta, r.eta_bound);
  j["max_eta_bound"] = worst_eta;
  if (!config.checks.empty()) {
    auto& checks = j["checks"] = nlohmann::json::array();
    for (const auto& c : evaluate_checks(config, rows)) {
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    }
  }
  return j;
}

std::vector<CheckOutcome> evaluate_checks(const ExperimentConfig& config, std::span<const SweepRow> rows) {
  std::vector<CheckOutcome> out;
  const auto med = median_errors(rows);
  const auto& checks = config.checks;
  if (get_or(checks, "median_decreasing", false)) {
    CheckOutcome c{"median_decreasing", true, ""};
    std::ostringstream detail;
    for (std::size_t a = 0; a < med.size(); ++a) {
      detail << (a ? " " : "") << med[a].median_max_sq_error;
      if (a > 0 && !(med[a].median_max_sq_error < med[a - 1].median_max_sq_error)) c.pass = false;
    }
    c.detail = detail.str();
    out.push_back(c);
  }
  if (checks.contains("slope_range")) {
    const auto range = checks.at("slope_range").get<std::vector<double>>();
    if (range.size() != 2) throw ConfigError("slope_range must be [lo, hi]");
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : med) pts.emplace_back(p.M, p.median_max_sq_error);
    CheckOutcome c{"slope_range", false, ""};
    try {
      const double s = fit_scaling_slope(pts);
      c.pass = s >= range[0] && s <= range[1];
      c.detail = "slope " + format_double(s);
    } catch (const std::invalid_argument& e) {
      c.detail = e.what();
    }
    out.push_back(c);
  }
  if (checks.contains("min_success_rate")) {
    const auto& spec = checks.at("min_success_rate");
    const int M = spec.at("M").get<int>();
    const double rate = spec.at("rate").get<double>();
    CheckOutcome c{"min_success_rate", false, "no rows at M = " + std::to_string(M)};
    for (const auto& p : success_rate(rows, config.eps)) {
      if (p.M == M) {
        c.pass = p.rate >= rate;
        c.detail = std::to_string(p.successes) + "/" + std::to_string(p.trials);
      }
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace expfam
