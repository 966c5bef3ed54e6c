#include "kgprompt/kg/paths.hpp"

#include <map>
#include <set>

namespace kgprompt::kg {

RelationLink ReasoningPath::link() const {
  RelationLink l;
  l.relations.reserve(steps.size());
  for (const auto& s : steps) l.relations.push_back(s.relation);
  return l;
}

std::vector<Triple> ReasoningPath::triples() const {
  std::vector<Triple> out;
  out.reserve(steps.size());
  EntityId head = origin;
  for (const auto& s : steps) {
    out.push_back({head, s.relation, s.entity});
    head = s.entity;
  }
  return out;
}

std::vector<RelationLink> enumerate_relation_links(const KnowledgeGraph& kg, EntityId anchor,
                                                   std::size_t max_depth) {
  if (!kg.has_entity(anchor)) {
    throw UnknownEntityError("anchor entity id " + std::to_string(anchor) + " is not in the graph");
  }
  if (max_depth == 0) throw std::invalid_argument("enumerate_relation_links: max_depth must be positive");

  // Level-synchronous search over relation prefixes; each prefix carries the
  // set of entities it can end at.
  std::map<RelationLink, std::set<EntityId>> frontier;
  frontier[RelationLink{}].insert(anchor);
  std::vector<RelationLink> links;
  for (std::size_t depth = 1; depth <= max_depth && !frontier.empty(); ++depth) {
    std::map<RelationLink, std::set<EntityId>> next;
    for (const auto& [prefix, ends] : frontier) {
      for (EntityId e : ends) {
        for (const Edge& edge : kg.out_edges(e)) {
          RelationLink extended = prefix;
          extended.relations.push_back(edge.relation);
          next[std::move(extended)].insert(edge.tail);
        }
      }
    }
    for (const auto& entry : next) links.push_back(entry.first);
    frontier = std::move(next);
  }
  return links;
}

namespace {

void extend(const KnowledgeGraph& kg, const RelationLink& link, std::size_t cap, ReasoningPath& current,
            std::vector<ReasoningPath>& out) {
  if (out.size() >= cap) return;
  const std::size_t depth = current.steps.size();
  if (depth == link.relations.size()) {
    out.push_back(current);
    return;
  }
  const RelationId r = link.relations[depth];
  const EntityId at = current.steps.empty() ? current.origin : current.steps.back().entity;
  for (const Edge& edge : kg.out_edges(at, r)) {
    current.steps.push_back({r, edge.tail});
    extend(kg, link, cap, current, out);
    current.steps.pop_back();
    if (out.size() >= cap) return;
  }
}

}  // namespace

std::vector<ReasoningPath> instantiate_paths(const KnowledgeGraph& kg, EntityId anchor,
                                             const RelationLink& link, std::size_t cap) {
  if (!kg.has_entity(anchor)) {
    throw UnknownEntityError("anchor entity id " + std::to_string(anchor) + " is not in the graph");
  }
  if (link.relations.empty()) throw std::invalid_argument("instantiate_paths: empty relation link");
  std::vector<ReasoningPath> out;
  if (cap == 0) return out;
  for (RelationId r : link.relations) {
    if (!kg.has_relation(r)) return out;
  }
  ReasoningPath current{anchor, {}};
  extend(kg, link, cap, current, out);
  return out;
}

bool validate_path(const KnowledgeGraph& kg, const ReasoningPath& path) {
  for (const auto& t : path.triples()) {
    if (!kg.contains(t)) return false;
  }
  return true;
}

std::vector<std::string> link_labels(const KnowledgeGraph& kg, const RelationLink& link) {
  std::vector<std::string> out;
  out.reserve(link.relations.size());
  for (RelationId r : link.relations) out.push_back(kg.relation_label(r));
  return out;
}

std::string render_path(const KnowledgeGraph& kg, const ReasoningPath& path) {
  std::string out = kg.entity_label(path.origin);
  for (const auto& s : path.steps) {
    out += ' ';
    out += kg.relation_label(s.relation);
    out += ' ';
    out += kg.entity_label(s.entity);
  }
  return out;
}

}  // namespace kgprompt::kg
