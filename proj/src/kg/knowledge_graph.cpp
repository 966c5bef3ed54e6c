#include "kgprompt/kg/knowledge_graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace kgprompt::kg {

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::intern(std::string_view label) {
  auto [it, inserted] = index_.try_emplace(std::string(label), static_cast<std::uint32_t>(labels_.size()));
  if (inserted) labels_.emplace_back(label);
  return it->second;
}

KnowledgeGraph::Builder& KnowledgeGraph::Builder::add(std::string_view head, std::string_view relation,
                                                      std::string_view tail) {
  const EntityId h = entities_.intern(head);
  const RelationId r = relations_.intern(relation);
  const EntityId t = entities_.intern(tail);
  triples_.push_back({h, r, t});
  return *this;
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  KnowledgeGraph kg;
  kg.entities_ = std::move(entities_);
  kg.relations_ = std::move(relations_);
  std::vector<Triple> sorted = triples_;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  kg.input_order_.reserve(sorted.size());
  std::vector<bool> emitted(sorted.size(), false);
  for (const auto& t : triples_) {
    const auto pos = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
    if (!emitted[pos]) {
      emitted[pos] = true;
      kg.input_order_.push_back(t);
    }
  }
  kg.triples_ = std::move(sorted);
  kg.edges_.reserve(kg.triples_.size());
  for (const auto& t : kg.triples_) kg.edges_.push_back({t.relation, t.tail});
  kg.offsets_.assign(kg.entities_.size() + 1, 0);
  for (const auto& t : kg.triples_) ++kg.offsets_[t.head + 1];
  for (std::size_t i = 1; i < kg.offsets_.size(); ++i) kg.offsets_[i] += kg.offsets_[i - 1];
  return kg;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

KnowledgeGraph KnowledgeGraph::load(std::istream& in) {
  Builder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw LoadError(line_no, "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (fields[i].empty()) {
        static constexpr const char* kNames[] = {"head", "relation", "tail"};
        throw LoadError(line_no, std::string("empty ") + kNames[i] + " field");
      }
    }
    builder.add(fields[0], fields[1], fields[2]);
  }
  return std::move(builder).build();
}

KnowledgeGraph KnowledgeGraph::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open triple file '" + path + "'");
  return load(in);
}

void KnowledgeGraph::write_tsv(std::ostream& out) const {
  for (const auto& t : input_order_) {
    out << entities_.label(t.head) << '\t' << relations_.label(t.relation) << '\t'
        << entities_.label(t.tail) << '\n';
  }
}

std::span<const Edge> KnowledgeGraph::out_edges(EntityId e) const {
  if (!has_entity(e)) throw UnknownEntityError("unknown entity id " + std::to_string(e));
  return std::span<const Edge>(edges_).subspan(offsets_[e], offsets_[e + 1] - offsets_[e]);
}

std::span<const Edge> KnowledgeGraph::out_edges(EntityId e, RelationId r) const {
  const auto all = out_edges(e);
  auto lo = std::lower_bound(all.begin(), all.end(), Edge{r, 0});
  auto hi = std::lower_bound(lo, all.end(), Edge{r + 1, 0});
  return all.subspan(static_cast<std::size_t>(lo - all.begin()), static_cast<std::size_t>(hi - lo));
}

bool KnowledgeGraph::contains(const Triple& t) const {
  if (!has_entity(t.head)) return false;
  const auto edges = out_edges(t.head);
  return std::binary_search(edges.begin(), edges.end(), Edge{t.relation, t.tail});
}

EntityId KnowledgeGraph::require_entity(std::string_view label) const {
  if (auto id = find_entity(label)) return *id;
  throw UnknownEntityError("unknown entity '" + std::string(label) + "'");
}

}  // namespace kgprompt::kg
