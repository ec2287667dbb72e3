#include "expfam/factor_graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace expfam {

namespace {

bool strictly_contains(const Clique& outer, const Clique& inner) {
  return outer.size() > inner.size() && std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

FactorGraph assemble(int n, std::size_t family_size, std::vector<int> factors, std::vector<Clique> supports) {
  FactorGraph g;
  g.n = n;
  g.family_size = family_size;
  g.factors = std::move(factors);
  g.supports = std::move(supports);
  for (std::size_t t = 0; t < g.factors.size(); ++t) {
    for (int var : g.supports[t]) g.edges.emplace_back(var, g.factors[t]);
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace

bool FactorGraph::has_factor(int k) const { return std::binary_search(factors.begin(), factors.end(), k); }

const Clique& FactorGraph::support_of(int k) const {
  auto it = std::lower_bound(factors.begin(), factors.end(), k);
  if (it == factors.end() || *it != k) throw std::out_of_range("factor " + std::to_string(k) + " not in graph");
  return supports[static_cast<std::size_t>(it - factors.begin())];
}

FactorGraph build_factor_graph(const Family& family, std::span<const int> kept) {
  std::vector<int> factors(kept.begin(), kept.end());
  std::sort(factors.begin(), factors.end());
  factors.erase(std::unique(factors.begin(), factors.end()), factors.end());
  std::vector<Clique> supports;
  supports.reserve(factors.size());
  for (int k : factors) {
    if (k < 0 || static_cast<std::size_t>(k) >= family.size()) {
      throw std::out_of_range("unknown factor index " + std::to_string(k));
    }
    supports.push_back(family.factor(k).support());
  }
  return assemble(family.n(), family.size(), std::move(factors), std::move(supports));
}

FactorGraph build_factor_graph(const Family& family) {
  std::vector<int> all(family.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
  return build_factor_graph(family, all);
}

FactorGraph model_factor_graph(const Model& model) {
  std::vector<int> kept;
  for (std::size_t k = 0; k < model.theta_star().size(); ++k) {
    if (model.theta_star()[k] != 0.0) kept.push_back(static_cast<int>(k));
  }
  return build_factor_graph(model.family(), kept);
}

StructureSet maximal_structure(const FactorGraph& graph) {
  // Only distinct supports matter for containment.
  std::vector<Clique> distinct = graph.supports;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<Clique> maximal;
  for (const Clique& c : distinct) {
    const bool dominated =
        std::any_of(distinct.begin(), distinct.end(), [&](const Clique& other) { return strictly_contains(other, c); });
    if (!dominated) maximal.push_back(c);
  }

  StructureSet out;
  out.cliques = maximal;
  for (std::size_t t = 0; t < graph.factors.size(); ++t) {
    if (std::binary_search(maximal.begin(), maximal.end(), graph.supports[t])) {
      out.maximal_factors.push_back(graph.factors[t]);
      out.spans[graph.supports[t]].push_back(graph.factors[t]);
    }
  }
  return out;
}

FactorGraph induced_subgraph(const FactorGraph& graph, std::span<const int> kept) {
  std::vector<int> wanted(kept.begin(), kept.end());
  for (int k : wanted) {
    if (k < 0 || static_cast<std::size_t>(k) >= graph.family_size) {
      throw std::out_of_range("unknown factor index " + std::to_string(k));
    }
  }
  std::sort(wanted.begin(), wanted.end());
  std::vector<int> factors;
  std::vector<Clique> supports;
  for (std::size_t t = 0; t < graph.factors.size(); ++t) {
    if (std::binary_search(wanted.begin(), wanted.end(), graph.factors[t])) {
      factors.push_back(graph.factors[t]);
      supports.push_back(graph.supports[t]);
    }
  }
  return assemble(graph.n, graph.family_size, std::move(factors), std::move(supports));
}

}  // namespace expfam
