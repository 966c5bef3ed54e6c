#include "kgprompt/retrieval/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace kgprompt::retrieval {

std::vector<std::string> lexical_tokens(std::string_view text) {
  static constexpr std::string_view kSeparators = "._-?!,;:'\"()[]{}";
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || kSeparators.find(c) != std::string_view::npos) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double LexicalScorer::score(const kg::KnowledgeGraph& graph, const Question& q, const kg::RelationLink& link) const {
  const auto qt = lexical_tokens(q.text);
  const std::set<std::string> question(qt.begin(), qt.end());
  std::set<std::string> labels;
  for (const auto& label : kg::link_labels(graph, link)) {
    for (auto& t : lexical_tokens(label)) labels.insert(std::move(t));
  }
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& t : labels) hit += question.count(t);
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer over a running xor
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

}  // namespace

double RandomScorer::score(const kg::KnowledgeGraph&, const Question& q, const kg::RelationLink& link) const {
  std::uint64_t h = mix(0, seed_);
  for (unsigned char c : q.text) h = mix(h, c);
  h = mix(h, link.relations.size());
  for (auto r : link.relations) h = mix(h, r);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::vector<ScoredLink> score_links(const kg::KnowledgeGraph& graph, const Question& q,
                                    std::span<const kg::RelationLink> links, const LinkScorer& scorer) {
  if (links.empty()) throw std::invalid_argument("score_links: empty link set");
  struct Row {
    ScoredLink scored;
    std::vector<std::string> labels;
  };
  std::vector<Row> rows;
  rows.reserve(links.size());
  for (const auto& l : links) {
    const double s = scorer.score(graph, q, l);
    if (!std::isfinite(s)) throw std::runtime_error("score_links: scorer returned a non-finite score");
    rows.push_back({{l, s}, kg::link_labels(graph, l)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.scored.score != b.scored.score) return a.scored.score > b.scored.score;
    return a.labels < b.labels;
  });
  std::vector<ScoredLink> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(r.scored));
  return out;
}

std::vector<kg::RelationLink> candidate_links(const kg::KnowledgeGraph& graph, const Question& q, std::size_t hops) {
  std::set<kg::RelationLink> merged;
  for (auto anchor : q.anchors) {
    for (auto& l : kg::enumerate_relation_links(graph, anchor, hops)) merged.insert(std::move(l));
  }
  return {merged.begin(), merged.end()};
}

ReasoningGraph build_reasoning_graph(const kg::KnowledgeGraph& graph, const Question& q, std::size_t hops,
                                     const LinkScorer& scorer, std::size_t k, std::size_t cap) {
  if (k == 0 || cap == 0) throw std::invalid_argument("build_reasoning_graph: k and cap must be positive");
  if (q.anchors.empty()) throw std::invalid_argument("build_reasoning_graph: question has no anchors");
  ReasoningGraph rg;
  rg.hops = hops;
  const auto links = candidate_links(graph, q, hops);
  if (links.empty()) return rg;
  auto ranked = score_links(graph, q, links, scorer);
  if (ranked.size() > k) ranked.resize(k);
  rg.selected_links = std::move(ranked);
  for (const auto& sl : rg.selected_links) {
    // Per selected link, paths from each anchor in anchor order, `cap` in total.
    std::size_t taken = 0;
    for (auto anchor : q.anchors) {
      if (taken == cap) break;
      for (auto& p : kg::instantiate_paths(graph, anchor, sl.link, cap - taken)) {
        rg.paths.push_back(std::move(p));
        ++taken;
      }
    }
  }
  return rg;
}

ReasoningGraph build_reasoning_graph(const kg::KnowledgeGraph& graph, const Question& q, const HopClassifier& clf,
                                     const LinkScorer& scorer, std::size_t k, std::size_t cap) {
  for (auto a : q.anchors) {
    if (!graph.has_entity(a)) throw kg::UnknownEntityError("anchor entity id " + std::to_string(a) + " is not in the graph");
  }
  return build_reasoning_graph(graph, q, clf.predict(q), scorer, k, cap);
}

}  // namespace kgprompt::retrieval
