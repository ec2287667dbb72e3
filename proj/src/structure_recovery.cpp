#include "expfam/structure_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace expfam {

namespace {

nlohmann::json clique_json(const Clique& c) {
  auto j = nlohmann::json::array();
  for (int v : c) j.push_back(v + 1);
  return j;
}

std::vector<NeighborhoodEstimate> solve_all(const Family& family, const QuadraticSource& source, double B,
                                            const SolverOptions& solver, std::span<const int> kept) {
  std::vector<NeighborhoodEstimate> out(static_cast<std::size_t>(family.n()));
  std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < family.n(); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = learn_neighborhood(family, i, source, B, solver, kept);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

QuadraticSource batch_source(const Family& family, const SampleBatch& batch) {
  return [&family, &batch](int vertex, std::span<const int> kept) {
    return assemble_quadratic(family, vertex, batch, kept);
  };
}

std::optional<double> NeighborhoodEstimate::estimate(int factor) const {
  const auto it = std::lower_bound(active.begin(), active.end(), factor);
  if (it == active.end() || *it != factor) return std::nullopt;
  return solve.theta_hat[it - active.begin()];
}

NeighborhoodEstimate learn_neighborhood(const Family& family, int i, const QuadraticSource& source, double B,
                                        const SolverOptions& solver, std::span<const int> kept) {
  NeighborhoodEstimate est;
  est.vertex = i;
  // A non-empty request that shares nothing with K_i leaves no parameters.
  if (!kept.empty() && active_factors(family, i, kept).empty()) {
    est.solve.theta_hat = Eigen::VectorXd(0);
    est.solve.converged = true;
    return est;
  }
  const LocalQuadratic quad = source(i, kept);
  est.active = quad.active;
  est.solve = solve(quad, local_constraints(family, quad.active, B), solver);
  return est;
}

NeighborhoodEstimate learn_neighborhood(const Family& family, int i, const SampleBatch& batch, double B,
                                        const SolverOptions& solver) {
  return learn_neighborhood(family, i, batch_source(family, batch), B, solver);
}

FamilyEstimate recover_family_structure(const Family& family, const QuadraticSource& source, double B,
                                        const SolverOptions& solver) {
  FamilyEstimate out;
  out.vertices = solve_all(family, source, B, solver, {});
  out.structure = maximal_structure(build_factor_graph(family));
  out.maximal.resize(static_cast<std::size_t>(family.n()));
  for (int k : out.structure.maximal_factors) {
    for (const auto& [var, deg] : family.factor(k).terms()) {
      (void)deg;
      out.maximal[static_cast<std::size_t>(var)][k] = *out.vertices[static_cast<std::size_t>(var)].estimate(k);
    }
  }
  return out;
}

FamilyEstimate recover_family_structure(const Family& family, const SampleBatch& batch, double B,
                                        const SolverOptions& solver) {
  return recover_family_structure(family, batch_source(family, batch), B, solver);
}

double Algorithm1Options::threshold() const {
  if (!(eps > 0) || eps > 1) throw std::invalid_argument("eps must lie in (0, 1]");
  return tau ? *tau : std::sqrt(eps);
}

RecoveryReport algorithm1(const Family& family, const QuadraticSource& source, double B,
                          const Algorithm1Options& options) {
  RecoveryReport report;
  report.threshold = options.threshold();
  const FactorGraph full = build_factor_graph(family);
  std::vector<int> kept = full.factors;
  std::vector<NeighborhoodEstimate> estimates;
  StructureSet structure;
  for (int s = 0; s <= family.w(); ++s) {
    const FactorGraph graph = induced_subgraph(full, kept);
    structure = maximal_structure(graph);
    IterationLog log;
    log.s = s;
    log.kept = kept;
    log.cliques = structure.cliques;
    if (kept.empty()) {
      estimates.assign(static_cast<std::size_t>(family.n()), NeighborhoodEstimate{});
      for (int i = 0; i < family.n(); ++i) {
        estimates[static_cast<std::size_t>(i)].vertex = i;
        estimates[static_cast<std::size_t>(i)].solve.theta_hat = Eigen::VectorXd(0);
      }
    } else {
      estimates = solve_all(family, source, B, options.solver, kept);
    }
    for (const auto& e : estimates) report.max_eta_bound = std::max(report.max_eta_bound, e.solve.eta_bound);

    for (const auto& clique : structure.cliques) {
      bool survives = false;
      for (int i : clique) {
        for (int k : structure.spans.at(clique)) {
          const auto v = estimates[static_cast<std::size_t>(i)].estimate(k);
          if (!v) continue;
          const double q = options.signed_threshold ? *v : std::abs(*v);
          if (q > report.threshold) survives = true;
        }
      }
      if (!survives) {
        log.pruned_cliques.push_back(clique);
        const auto& span = structure.spans.at(clique);
        log.pruned_factors.insert(log.pruned_factors.end(), span.begin(), span.end());
      }
    }
    std::sort(log.pruned_factors.begin(), log.pruned_factors.end());
    report.iterations.push_back(log);
    if (s == family.w()) break;  // N^w is logged but not applied
    std::vector<int> next;
    std::set_difference(kept.begin(), kept.end(), log.pruned_factors.begin(), log.pruned_factors.end(),
                        std::back_inserter(next));
    kept = std::move(next);
  }
  report.structure = std::move(structure);
  report.estimates = std::move(estimates);
  return report;
}

RecoveryReport algorithm1(const Family& family, const SampleBatch& batch, double B, const Algorithm1Options& options) {
  return algorithm1(family, batch_source(family, batch), B, options);
}

std::vector<FactorError> factor_errors(const std::vector<NeighborhoodEstimate>& estimates,
                                       std::span<const double> theta_star, std::optional<std::span<const int>> only) {
  std::vector<FactorError> out;
  for (const auto& e : estimates) {
    for (std::size_t a = 0; a < e.active.size(); ++a) {
      const int k = e.active[a];
      if (k < 0 || static_cast<std::size_t>(k) >= theta_star.size()) throw std::out_of_range("factor index outside theta");
      if (only && std::find(only->begin(), only->end(), k) == only->end()) continue;
      const double est = e.solve.theta_hat[static_cast<Eigen::Index>(a)];
      const double truth = theta_star[static_cast<std::size_t>(k)];
      out.push_back({e.vertex, k, est, truth, (est - truth) * (est - truth)});
    }
  }
  return out;
}

double max_sq_error(const std::vector<FactorError>& errors) {
  double m = 0.0;
  for (const auto& e : errors) m = std::max(m, e.sq_error);
  return m;
}

StructureDiff structure_diff(std::span<const Clique> estimated, std::span<const Clique> truth) {
  auto normalize = [](std::span<const Clique> cs) {
    std::set<Clique> out;
    for (Clique c : cs) {
      std::sort(c.begin(), c.end());
      out.insert(std::move(c));
    }
    return out;
  };
  const auto e = normalize(estimated);
  const auto t = normalize(truth);
  StructureDiff diff;
  std::set_difference(t.begin(), t.end(), e.begin(), e.end(), std::back_inserter(diff.missing));
  std::set_difference(e.begin(), e.end(), t.begin(), t.end(), std::back_inserter(diff.spurious));
  diff.exact = diff.missing.empty() && diff.spurious.empty();
  return diff;
}

nlohmann::json to_json(const RecoveryReport& report, const Family& family,
                       std::optional<std::span<const double>> theta_star) {
  nlohmann::json j;
  j["threshold"] = report.threshold;
  j["max_eta_bound"] = report.max_eta_bound;
  auto& cliques = j["cliques"] = nlohmann::json::array();
  for (const auto& c : report.structure.cliques) {
    nlohmann::json entry;
    entry["variables"] = clique_json(c);
    auto& span = entry["span"] = nlohmann::json::array();
    for (int k : report.structure.spans.at(c)) span.push_back(family.factor(k).to_string());
    cliques.push_back(entry);
  }
  auto& iters = j["iterations"] = nlohmann::json::array();
  for (const auto& it : report.iterations) {
    nlohmann::json entry;
    entry["s"] = it.s;
    entry["kept"] = it.kept.size();
    auto& pc = entry["pruned_cliques"] = nlohmann::json::array();
    for (const auto& c : it.pruned_cliques) pc.push_back(clique_json(c));
    auto& pf = entry["pruned_factors"] = nlohmann::json::array();
    for (int k : it.pruned_factors) pf.push_back(family.factor(k).to_string());
    iters.push_back(entry);
  }
  auto& est = j["estimates"] = nlohmann::json::array();
  for (const auto& e : report.estimates) {
    for (std::size_t a = 0; a < e.active.size(); ++a) {
      const int k = e.active[a];
      nlohmann::json entry;
      entry["vertex"] = e.vertex + 1;
      entry["factor"] = family.factor(k).to_string();
      entry["estimate"] = e.solve.theta_hat[static_cast<Eigen::Index>(a)];
      if (theta_star) {
        const double truth = (*theta_star)[static_cast<std::size_t>(k)];
        entry["truth"] = truth;
        entry["sq_error"] = (entry["estimate"].get<double>() - truth) * (entry["estimate"].get<double>() - truth);
      }
      est.push_back(entry);
    }
  }
  return j;
}

}  // namespace expfam
