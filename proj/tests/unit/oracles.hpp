#pragma once
// Test-only reference implementations. These deliberately avoid the
// library's indices and search routines.

#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgprompt/kg/knowledge_graph.hpp"
#include "kgprompt/kg/paths.hpp"

namespace oracle {

using namespace kgprompt::kg;

// Random multigraph over labels e0.., r0.. with `n_triples` draws (dupes allowed).
inline KnowledgeGraph random_graph(std::uint64_t seed, std::size_t n_entities, std::size_t n_relations,
                                   std::size_t n_triples) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> ent(0, n_entities - 1);
  std::uniform_int_distribution<std::size_t> rel(0, n_relations - 1);
  KnowledgeGraph::Builder b;
  for (std::size_t i = 0; i < n_triples; ++i) {
    b.add("e" + std::to_string(ent(rng)), "r" + std::to_string(rel(rng)), "e" + std::to_string(ent(rng)));
  }
  return std::move(b).build();
}

// Every walk of length 1..depth from `anchor`, found by scanning the full
// triple list at each step.
inline std::vector<ReasoningPath> all_walks(const KnowledgeGraph& kg, EntityId anchor, std::size_t depth) {
  std::vector<ReasoningPath> out;
  std::function<void(ReasoningPath&)> walk = [&](ReasoningPath& p) {
    if (!p.steps.empty()) out.push_back(p);
    if (p.steps.size() == depth) return;
    const EntityId at = p.steps.empty() ? p.origin : p.steps.back().entity;
    for (const Triple& t : kg.triples()) {
      if (t.head != at) continue;
      p.steps.push_back({t.relation, t.tail});
      walk(p);
      p.steps.pop_back();
    }
  };
  ReasoningPath start{anchor, {}};
  walk(start);
  return out;
}

inline std::set<RelationLink> brute_force_links(const KnowledgeGraph& kg, EntityId anchor, std::size_t depth) {
  std::set<RelationLink> links;
  for (const auto& p : all_walks(kg, anchor, depth)) links.insert(p.link());
  return links;
}

inline std::set<ReasoningPath> brute_force_paths(const KnowledgeGraph& kg, EntityId anchor,
                                                 const RelationLink& link) {
  std::set<ReasoningPath> out;
  for (const auto& p : all_walks(kg, anchor, link.length())) {
    if (p.link() == link) out.insert(p);
  }
  return out;
}

}  // namespace oracle
