#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "expfam/factor_graph.hpp"
#include "expfam/rng.hpp"

using namespace expfam;

namespace {

Family random_family(Rng& rng, int n, int d) {
  const Family all = Family::all_monomials(n, d, n, 0);
  std::vector<Factor> pick;
  for (const auto& f : all.factors()) {
    if (rng.uniform() < 0.35) pick.push_back(f);
  }
  if (pick.empty()) pick.push_back(all.factors().front());
  return Family(n, d, pick, 0);
}

bool subset_strict(const std::vector<int>& inner, const std::vector<int>& outer) {
  return inner.size() < outer.size() && std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

// O(|K|^2) pairwise containment.
std::vector<int> brute_maximal(const Family& fam) {
  std::vector<int> out;
  for (std::size_t a = 0; a < fam.size(); ++a) {
    bool dominated = false;
    for (std::size_t b = 0; b < fam.size() && !dominated; ++b) {
      dominated = subset_strict(fam.factors()[a].support(), fam.factors()[b].support());
    }
    if (!dominated) out.push_back(static_cast<int>(a));
  }
  return out;
}

std::set<std::pair<Clique, std::set<std::string>>> named_spans(const Family& fam, const StructureSet& s) {
  std::set<std::pair<Clique, std::set<std::string>>> out;
  for (const auto& [c, members] : s.spans) {
    std::set<std::string> names;
    for (int k : members) names.insert(fam.factor(k).to_string());
    out.emplace(c, names);
  }
  return out;
}

}  // namespace

TEST_CASE("edges follow supports") {
  const Family fam(2, 2, {Factor({{0, 1}}), Factor({{0, 1}, {1, 1}})}, 0);
  const int f1 = *fam.index_of(Factor({{0, 1}}));
  const int f2 = *fam.index_of(Factor({{0, 1}, {1, 1}}));
  const FactorGraph g = build_factor_graph(fam);
  std::vector<std::pair<int, int>> expected = {{0, f1}, {0, f2}, {1, f2}};
  std::sort(expected.begin(), expected.end());
  CHECK(g.edges == expected);

  const FactorGraph empty = build_factor_graph(fam, std::vector<int>{});
  CHECK(empty.factors.empty());
  CHECK(empty.edges.empty());
  CHECK_THROWS(build_factor_graph(fam, std::vector<int>{5}));
}

TEST_CASE("edge count equals total support size") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const Family fam = random_family(rng, 5, 3);
    std::size_t expected = 0;
    for (const auto& f : fam.factors()) expected += f.support_size();
    CHECK(build_factor_graph(fam).edges.size() == expected);
  }
}

TEST_CASE("maximal structure of x1, x2, x1x2, x1^2x2^2") {
  const Family fam(2, 4, {Factor({{0, 1}}), Factor({{1, 1}}), Factor({{0, 1}, {1, 1}}), Factor({{0, 2}, {1, 2}})}, 0);
  const StructureSet s = maximal_structure(build_factor_graph(fam));
  CHECK(s.cliques == std::vector<Clique>{{0, 1}});
  std::vector<int> expected = {*fam.index_of(Factor({{0, 1}, {1, 1}})), *fam.index_of(Factor({{0, 2}, {1, 2}}))};
  std::sort(expected.begin(), expected.end());
  CHECK(s.maximal_factors == expected);
  CHECK(s.spans.at({0, 1}) == expected);

  // removing the span of {1,2} leaves the singletons
  std::vector<int> rest = {*fam.index_of(Factor({{0, 1}})), *fam.index_of(Factor({{1, 1}}))};
  const StructureSet r = maximal_structure(induced_subgraph(build_factor_graph(fam), rest));
  CHECK(r.cliques == std::vector<Clique>{{0}, {1}});
}

TEST_CASE("single factor is maximal") {
  const Family fam(3, 2, {Factor({{1, 1}, {2, 1}})}, 0);
  const StructureSet s = maximal_structure(build_factor_graph(fam));
  CHECK(s.maximal_factors == std::vector<int>{0});
  CHECK(s.cliques == std::vector<Clique>{{1, 2}});
}

TEST_CASE("maximal structure matches pairwise containment and its invariants") {
  Rng rng(8);
  for (int t = 0; t < 60; ++t) {
    const Family fam = random_family(rng, rng.uniform_int(2, 5), rng.uniform_int(1, 3));
    const StructureSet s = maximal_structure(build_factor_graph(fam));
    CHECK(s.maximal_factors == brute_maximal(fam));

    // spans partition the maximal factors and are keyed by support
    std::vector<int> union_of_spans;
    for (const auto& [c, members] : s.spans) {
      CHECK_FALSE(members.empty());
      for (int k : members) {
        CHECK(fam.factor(k).support() == c);
        union_of_spans.push_back(k);
      }
    }
    std::sort(union_of_spans.begin(), union_of_spans.end());
    CHECK(union_of_spans == s.maximal_factors);
    CHECK(s.cliques.size() == s.spans.size());

    // every non-maximal support sits strictly inside some clique
    for (std::size_t k = 0; k < fam.size(); ++k) {
      if (std::binary_search(s.maximal_factors.begin(), s.maximal_factors.end(), static_cast<int>(k))) continue;
      const auto sup = fam.factors()[k].support();
      CHECK(std::any_of(s.cliques.begin(), s.cliques.end(), [&](const Clique& c) { return subset_strict(sup, c); }));
    }
  }
}

TEST_CASE("maximal structure does not depend on factor order") {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const Family fam = random_family(rng, 4, 3);
    std::vector<Factor> perm = fam.factors();
    for (std::size_t a = perm.size(); a > 1; --a) std::swap(perm[a - 1], perm[rng.uniform_int(0, static_cast<int>(a) - 1)]);
    const Family other(4, 3, perm, 0);
    const StructureSet s1 = maximal_structure(build_factor_graph(fam));
    const StructureSet s2 = maximal_structure(build_factor_graph(other));
    CHECK(s1.cliques == s2.cliques);
    CHECK(named_spans(fam, s1) == named_spans(other, s2));

    std::vector<int> kept(fam.size());
    std::iota(kept.begin(), kept.end(), 0);
    std::reverse(kept.begin(), kept.end());
    CHECK(maximal_structure(build_factor_graph(fam, kept)) == s1);
  }
}

TEST_CASE("induced subgraph composes by intersection") {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const Family fam = random_family(rng, 4, 3);
    const FactorGraph g = build_factor_graph(fam);
    std::vector<int> k1, k2, both;
    for (int k = 0; k < static_cast<int>(fam.size()); ++k) {
      const bool a = rng.uniform() < 0.6;
      const bool b = rng.uniform() < 0.6;
      if (a) k1.push_back(k);
      if (b) k2.push_back(k);
      if (a && b) both.push_back(k);
    }
    CHECK(induced_subgraph(g, both) == induced_subgraph(induced_subgraph(g, k1), k2));
    CHECK(induced_subgraph(g, g.factors) == g);
    const FactorGraph none = induced_subgraph(g, std::vector<int>{});
    CHECK(none.factors.empty());
    CHECK(none.n == g.n);
  }
}

TEST_CASE("model structure uses nonzero weights only") {
  const Family fam = Family::all_monomials(3, 2, 2, 4, true);
  std::vector<double> theta(fam.size(), 0.0);
  theta[static_cast<std::size_t>(*fam.index_of(Factor({{0, 1}, {1, 1}})))] = 0.5;
  theta[static_cast<std::size_t>(*fam.index_of(Factor({{2, 1}})))] = 0.5;
  const Model m(fam, theta, 1, {1.0, 3});
  CHECK(model_structure(m) == std::vector<Clique>{{0, 1}, {2}});
  CHECK(model_factor_graph(m).factors.size() == 2);
}
