#pragma once
// Relation links (relation-type sequences) and their concrete realizations.

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "kgprompt/kg/knowledge_graph.hpp"

namespace kgprompt::kg {

struct RelationLink {
  std::vector<RelationId> relations;

  std::size_t length() const noexcept { return relations.size(); }

  // Canonical order: shorter first, then lexicographic on relation ids.
  std::strong_ordering operator<=>(const RelationLink& other) const {
    if (auto c = relations.size() <=> other.relations.size(); c != 0) return c;
    return relations <=> other.relations;
  }
  bool operator==(const RelationLink&) const = default;
};

struct PathStep {
  RelationId relation = 0;
  EntityId entity = 0;

  auto operator<=>(const PathStep&) const = default;
};

struct ReasoningPath {
  EntityId origin = 0;
  std::vector<PathStep> steps;

  RelationLink link() const;
  EntityId terminal() const { return steps.empty() ? origin : steps.back().entity; }
  // The path as (head, relation, tail) triples, in order.
  std::vector<Triple> triples() const;

  auto operator<=>(const ReasoningPath&) const = default;
};

// Every distinct relation sequence of length 1..max_depth realized by some
// walk from `anchor`. Walks may revisit entities. Sorted canonically.
std::vector<RelationLink> enumerate_relation_links(const KnowledgeGraph& kg, EntityId anchor,
                                                   std::size_t max_depth);

// Up to `cap` walks from `anchor` following `link`, depth-first over the
// sorted out-index.
std::vector<ReasoningPath> instantiate_paths(const KnowledgeGraph& kg, EntityId anchor,
                                             const RelationLink& link, std::size_t cap);

// True when every hop of `path` is a stored triple.
bool validate_path(const KnowledgeGraph& kg, const ReasoningPath& path);

std::vector<std::string> link_labels(const KnowledgeGraph& kg, const RelationLink& link);
std::string render_path(const KnowledgeGraph& kg, const ReasoningPath& path);

}  // namespace kgprompt::kg
