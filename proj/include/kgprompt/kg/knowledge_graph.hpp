#pragma once
// Immutable in-memory triple store.
//
// Entity and relation labels map to dense 0-based ids in first-appearance
// order. Each entity's outgoing edges are kept sorted by (relation, tail),
// which makes relation-filtered neighbour lookups a binary search and fixes
// the depth-first order used by path instantiation.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgprompt::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

struct Edge {
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Edge&) const = default;
};

class LoadError : public std::runtime_error {
 public:
  LoadError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownEntityError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class Vocabulary {
 public:
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  // Returns the existing id or appends a new one.
  std::uint32_t intern(std::string_view label);

  bool operator==(const Vocabulary& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

class KnowledgeGraph {
 public:
  class Builder {
   public:
    Builder& add(std::string_view head, std::string_view relation, std::string_view tail);
    KnowledgeGraph build() &&;

   private:
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
  };

  KnowledgeGraph() = default;

  // Reads `head<TAB>relation<TAB>tail` lines. Blank lines are skipped.
  static KnowledgeGraph load(std::istream& in);
  static KnowledgeGraph load_file(const std::string& path);

  // One line per stored triple, in first-appearance order, so reloading the
  // output reproduces the same id assignment.
  void write_tsv(std::ostream& out) const;

  const Vocabulary& entities() const noexcept { return entities_; }
  const Vocabulary& relations() const noexcept { return relations_; }
  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }
  std::size_t triple_count() const noexcept { return triples_.size(); }

  // Sorted by (head, relation, tail).
  std::span<const Triple> triples() const noexcept { return triples_; }

  std::span<const Edge> out_edges(EntityId e) const;
  // Outgoing edges of `e` labelled `r`, sorted by tail.
  std::span<const Edge> out_edges(EntityId e, RelationId r) const;

  bool contains(const Triple& t) const;
  bool has_entity(EntityId e) const noexcept { return e < entities_.size(); }
  bool has_relation(RelationId r) const noexcept { return r < relations_.size(); }

  std::optional<EntityId> find_entity(std::string_view label) const { return entities_.find(label); }
  std::optional<RelationId> find_relation(std::string_view label) const { return relations_.find(label); }
  EntityId require_entity(std::string_view label) const;

  const std::string& entity_label(EntityId e) const { return entities_.label(e); }
  const std::string& relation_label(RelationId r) const { return relations_.label(r); }

  bool operator==(const KnowledgeGraph& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_ && triples_ == other.triples_;
  }

 private:
  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::vector<Triple> input_order_;
  std::vector<Edge> edges_;           // edges_[i] mirrors triples_[i]
  std::vector<std::size_t> offsets_;  // entity -> first index into triples_
};

}  // namespace kgprompt::kg
