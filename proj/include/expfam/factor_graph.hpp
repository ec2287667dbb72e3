#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "expfam/family.hpp"

namespace expfam {

/// Sorted list of 0-based variable indices.
using Clique = std::vector<int>;

/// Bipartite variable/factor graph. The factor side holds family factor
/// indices; (i, k) is an edge iff i is in the support of factor k.
struct FactorGraph {
  int n = 0;
  std::size_t family_size = 0;
  std::vector<int> factors;            // sorted family indices
  std::vector<Clique> supports;        // aligned with factors
  std::vector<std::pair<int, int>> edges;  // (variable, factor index), sorted

  bool has_factor(int k) const;
  const Clique& support_of(int k) const;

  friend bool operator==(const FactorGraph&, const FactorGraph&) = default;
};

/// Maximal factors, the maximal cliques they span, and the span of each.
struct StructureSet {
  std::vector<int> maximal_factors;
  std::vector<Clique> cliques;
  std::map<Clique, std::vector<int>> spans;

  friend bool operator==(const StructureSet&, const StructureSet&) = default;
};

FactorGraph build_factor_graph(const Family& family, std::span<const int> kept);
FactorGraph build_factor_graph(const Family& family);
/// G*: factors with a nonzero true weight.
FactorGraph model_factor_graph(const Model& model);

/// A factor is maximal iff no other retained factor's support strictly
/// contains its support. Equal supports are all retained.
StructureSet maximal_structure(const FactorGraph& graph);

/// Restricts the factor side to `kept`; indices outside the graph are ignored,
/// indices outside the family throw.
FactorGraph induced_subgraph(const FactorGraph& graph, std::span<const int> kept);

/// Structure S of a model: maximal cliques of G*.
inline std::vector<Clique> model_structure(const Model& model) {
  return maximal_structure(model_factor_graph(model)).cliques;
}

}  // namespace expfam
