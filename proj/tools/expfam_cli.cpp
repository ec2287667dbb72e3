// Command-line front end: sample, fit, recover, curvature, sweep, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "expfam/curvature_lab.hpp"
#include "expfam/experiment.hpp"
#include "expfam/model_io.hpp"
#include "expfam/rng.hpp"
#include "expfam/sampler.hpp"
#include "expfam/structure_recovery.hpp"

namespace {

using namespace expfam;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

std::uint64_t seed_override(std::uint64_t fallback) {
  const char* env = std::getenv("EXPFAM_SEED");
  if (!env || !*env) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used, 0);
    if (used != std::string(env).size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("EXPFAM_SEED is not an unsigned integer: ") + env);
  }
}

Clique parse_clique(const std::string& s, int n) {
  Clique c;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const int v = std::stoi(tok);
    if (v < 1 || v > n) throw ConfigError("clique variable out of range: " + tok);
    c.push_back(v - 1);
  }
  std::sort(c.begin(), c.end());
  if (c.empty() || std::adjacent_find(c.begin(), c.end()) != c.end()) throw ConfigError("invalid clique '" + s + "'");
  return c;
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(out, j);
  }
}

json clique_list(const std::vector<Clique>& cs) {
  json out = json::array();
  for (const auto& c : cs) {
    json v = json::array();
    for (int x : c) v.push_back(x + 1);
    out.push_back(v);
  }
  return out;
}

struct SampleArgs {
  std::string model;
  int M = 1000;
  std::uint64_t seed = 1;
  SamplerOptions sampler;
  std::string out = "samples.csv";
};

int run_sample(const SampleArgs& a) {
  const Model model = model_from_json(read_json_file(a.model));
  const auto batch = draw_samples(model, a.M, a.sampler, seed_override(a.seed));
  write_batch(a.out, batch);
  std::cout << "wrote " << batch.M << " samples to " << a.out << '\n';
  return 0;
}

struct FitArgs {
  std::string model;
  std::string samples;
  int B = 0;
  int vertex = 0;
  double tol_scale = 1.0;
  bool dump_quadratic = false;
  std::string out;
};

int run_fit(const FitArgs& a) {
  const Model model = model_from_json(read_json_file(a.model));
  const Family& fam = model.family();
  const SampleBatch batch = read_batch(a.samples);
  if (a.vertex < 0 || a.vertex > fam.n()) throw ConfigError("vertex out of range");
  const double B = a.B > 0 ? a.B : model.B();
  SolverOptions solver;
  solver.tol_scale = a.tol_scale;
  json out;
  out["B"] = B;
  out["M"] = batch.M;
  auto& vs = out["vertices"] = json::array();
  for (int i = 0; i < fam.n(); ++i) {
    if (a.vertex > 0 && i != a.vertex - 1) continue;
    const LocalQuadratic quad = assemble_quadratic(fam, i, batch);
    const SolveResult res = solve(quad, local_constraints(fam, quad.active, B), solver);
    json v;
    v["vertex"] = i + 1;
    v["solve"] = to_json(res);
    auto& fs = v["factors"] = json::array();
    for (std::size_t k = 0; k < quad.active.size(); ++k) {
      const int f = quad.active[k];
      const double est = res.theta_hat[static_cast<Eigen::Index>(k)];
      const double truth = model.theta_star()[static_cast<std::size_t>(f)];
      fs.push_back({{"factor", fam.factor(f).to_string()},
                    {"estimate", est},
                    {"truth", truth},
                    {"sq_error", (est - truth) * (est - truth)}});
    }
    if (a.dump_quadratic) v["quadratic"] = to_json(quad);
    vs.push_back(v);
  }
  emit(out, a.out);
  return 0;
}

struct RecoverArgs {
  std::string model;
  std::string samples;
  int B = 0;
  double eps = 0.04;
  double tau = 0.0;
  bool signed_threshold = false;
  double tol_scale = 1.0;
  std::string out;
};

int run_recover(const RecoverArgs& a) {
  const Model model = model_from_json(read_json_file(a.model));
  const Family& fam = model.family();
  const SampleBatch batch = read_batch(a.samples);
  Algorithm1Options opts;
  opts.eps = a.eps;
  if (a.tau > 0) opts.tau = a.tau;
  opts.signed_threshold = a.signed_threshold;
  opts.solver.tol_scale = a.tol_scale;
  const auto rep = algorithm1(fam, batch, a.B > 0 ? a.B : model.B(), opts);
  json out = to_json(rep, fam, std::span<const double>(model.theta_star()));
  const auto diff = structure_diff(rep.structure.cliques, model_structure(model));
  out["truth_cliques"] = clique_list(model_structure(model));
  out["missing"] = clique_list(diff.missing);
  out["spurious"] = clique_list(diff.spurious);
  out["exact"] = diff.exact;
  emit(out, a.out);
  return 0;
}

struct CurvatureArgs {
  std::string model;
  std::string samples;
  int vertex = 1;
  std::string clique;
  int deltas = 100;
  std::uint64_t seed = 1;
  bool no_base_term = false;
  int box_rows = 32;
  bool check = false;
  std::string out;
};

int run_curvature(const CurvatureArgs& a) {
  const Model model = model_from_json(read_json_file(a.model));
  const Family& fam = model.family();
  const int i = a.vertex - 1;
  if (i < 0 || i >= fam.n()) throw ConfigError("vertex out of range");
  const Clique clique = parse_clique(a.clique, fam.n());
  const SampleBatch truncated = truncate_to_box(read_batch(a.samples), model.tail().C_t);
  CurvatureCheckOptions opts;
  opts.mode.include_base_term = !a.no_base_term;
  opts.box_rows = a.box_rows;
  int boxes = 0;
  const double B_npc = batch_npc_constant(model, i, clique, truncated, opts, &boxes);
  Rng rng(seed_override(a.seed));
  const auto k = static_cast<Eigen::Index>(fam.factors_containing(i).size());
  int passed = 0;
  json reports = json::array();
  for (int r = 0; r < a.deltas; ++r) {
    Eigen::VectorXd delta(k);
    for (Eigen::Index t = 0; t < k; ++t) delta[t] = rng.uniform(-1.0, 1.0);
    auto rep = mc_curvature_check(model, i, clique, delta, truncated, B_npc, opts.min_samples);
    rep.boxes = boxes;
    passed += rep.pass ? 1 : 0;
    reports.push_back(to_json(rep));
  }
  std::cout << "B_NPC " << B_npc << "  C_p " << B_npc / (std::exp(1.0) * std::pow(model.tail().C_t, fam.d()))
            << "  boxes " << boxes << "  passed " << passed << "/" << a.deltas << '\n';
  if (!a.out.empty()) emit({{"B_npc", B_npc}, {"passed", passed}, {"total", a.deltas}, {"reports", reports}}, a.out);
  return a.check && passed != a.deltas ? kExitCheck : 0;
}

struct SweepArgs {
  std::string config;
  std::string out_dir;
  bool check = false;
};

int run_sweep_cmd(const SweepArgs& a) {
  ExperimentConfig config = config_from_json(read_json_file(a.config));
  config.seed = seed_override(config.seed);
  const auto rows = run_sweep(config);
  std::filesystem::path dir = a.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(a.out_dir);
  if (!a.out_dir.empty()) std::filesystem::create_directories(dir);
  const auto csv_path = dir / config.sweep_csv;
  {
    std::ofstream os(csv_path);
    if (!os) throw std::runtime_error("cannot write " + csv_path.string());
    write_sweep_csv(os, rows);
  }
  const json report = build_report(config, rows);
  write_json_file((dir / config.report_json).string(), report);
  std::cout << "wrote " << rows.size() << " rows to " << csv_path.string() << '\n';
  bool ok = true;
  for (const auto& c : evaluate_checks(config, rows)) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
    ok = ok && c.pass;
  }
  return a.check && !ok ? kExitCheck : 0;
}

struct ReportArgs {
  std::string csv;
  std::string config;
  double eps = 0.04;
  std::string out;
};

int run_report(const ReportArgs& a) {
  std::ifstream is(a.csv);
  if (!is) throw ConfigError("cannot read " + a.csv);
  const auto rows = read_sweep_csv(is);
  ExperimentConfig config;
  if (!a.config.empty()) {
    config = config_from_json(read_json_file(a.config));
  } else {
    config.eps = a.eps;
    if (!rows.empty()) config.id = rows.front().scenario;
  }
  emit(build_report(config, rows), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-matching structure learning for polynomial exponential families"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Draw Gibbs samples from a model");
  sample->add_option("--model", sa.model, "Model JSON")->required()->check(CLI::ExistingFile);
  sample->add_option("-M,--samples", sa.M, "Number of samples")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sa.seed, "Seed (EXPFAM_SEED overrides)");
  sample->add_option("--burn-in", sa.sampler.burn_in, "Burn-in sweeps")->check(CLI::NonNegativeNumber);
  sample->add_option("--thinning", sa.sampler.thinning, "Sweeps between kept samples")->check(CLI::PositiveNumber);
  sample->add_option("--grid-points", sa.sampler.grid_points, "Inverse-CDF grid size")->check(CLI::Range(16, 1 << 20));
  sample->add_option("-o,--out", sa.out, "Output CSV");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Per-vertex constrained score-matching fits");
  fit->add_option("--model", fa.model, "Model JSON")->required()->check(CLI::ExistingFile);
  fit->add_option("--samples", fa.samples, "Sample CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--B", fa.B, "l1 bound (default: model B)");
  fit->add_option("--vertex", fa.vertex, "Only this 1-based vertex");
  fit->add_option("--tol-scale", fa.tol_scale, "Multiplier on the default solver tolerance");
  fit->add_flag("--dump-quadratic", fa.dump_quadratic, "Include the assembled quadratic");
  fit->add_option("-o,--out", fa.out, "Output JSON (default stdout)");

  RecoverArgs ra;
  auto* recover = app.add_subcommand("recover", "Iterative clique pruning");
  recover->add_option("--model", ra.model, "Model JSON")->required()->check(CLI::ExistingFile);
  recover->add_option("--samples", ra.samples, "Sample CSV")->required()->check(CLI::ExistingFile);
  recover->add_option("--B", ra.B, "l1 bound (default: model B)");
  recover->add_option("--eps", ra.eps, "Target squared error")->check(CLI::Range(1e-12, 1.0));
  recover->add_option("--tau", ra.tau, "Pruning threshold (default sqrt(eps))");
  recover->add_flag("--signed", ra.signed_threshold, "Compare signed estimates");
  recover->add_option("--tol-scale", ra.tol_scale, "Multiplier on the default solver tolerance");
  recover->add_option("-o,--out", ra.out, "Output JSON (default stdout)");

  CurvatureArgs ca;
  auto* curvature = app.add_subcommand("curvature", "Monte-Carlo check of the curvature lower bound");
  curvature->add_option("--model", ca.model, "Model JSON")->required()->check(CLI::ExistingFile);
  curvature->add_option("--samples", ca.samples, "Sample CSV")->required()->check(CLI::ExistingFile);
  curvature->add_option("--vertex", ca.vertex, "1-based reference vertex");
  curvature->add_option("--clique", ca.clique, "Comma-separated 1-based clique")->required();
  curvature->add_option("--deltas", ca.deltas, "Random directions")->check(CLI::PositiveNumber);
  curvature->add_option("--seed", ca.seed, "Seed for the directions (EXPFAM_SEED overrides)");
  curvature->add_option("--box-rows", ca.box_rows, "Rows used for the B_NPC minimum")->check(CLI::PositiveNumber);
  curvature->add_flag("--no-base-term", ca.no_base_term, "Drop the base measure from the mode search");
  curvature->add_flag("--check", ca.check, "Exit 3 unless every direction passes");
  curvature->add_option("-o,--out", ca.out, "Output JSON");

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "Run a configured experiment sweep");
  sweep->add_option("--config", wa.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out-dir", wa.out_dir, "Directory for sweep.csv and report.json");
  sweep->add_flag("--check", wa.check, "Exit 3 if a configured check fails");

  ReportArgs pa;
  auto* report = app.add_subcommand("report", "Summarize an existing sweep CSV");
  report->add_option("--csv", pa.csv, "Sweep CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--config", pa.config, "Config to echo and check");
  report->add_option("--eps", pa.eps, "Success threshold when no config is given");
  report->add_option("-o,--out", pa.out, "Output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sample) return run_sample(sa);
    if (*fit) return run_fit(fa);
    if (*recover) return run_recover(ra);
    if (*curvature) return run_curvature(ca);
    if (*sweep) return run_sweep_cmd(wa);
    if (*report) return run_report(pa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
