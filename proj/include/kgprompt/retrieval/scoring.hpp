#pragma once
// Link scoring and reasoning-graph sampling.

#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kgprompt/kg/paths.hpp"
#include "kgprompt/retrieval/hop_classifier.hpp"
#include "kgprompt/retrieval/question.hpp"

namespace kgprompt::retrieval {

struct ScoredLink {
  kg::RelationLink link;
  double score = 0.0;
};

class LinkScorer {
 public:
  virtual ~LinkScorer() = default;
  virtual double score(const kg::KnowledgeGraph& graph, const Question& q, const kg::RelationLink& link) const = 0;
};

// Lowercase, split on whitespace and . _ - and common punctuation.
std::vector<std::string> lexical_tokens(std::string_view text);

// |tokens(question) ∩ tokens(labels)| / |tokens(labels)| over token sets.
class LexicalScorer final : public LinkScorer {
 public:
  double score(const kg::KnowledgeGraph& graph, const Question& q, const kg::RelationLink& link) const override;
};

// Seeded uniform scores in [0, 1), a pure function of (seed, question, link).
class RandomScorer final : public LinkScorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  double score(const kg::KnowledgeGraph& graph, const Question& q, const kg::RelationLink& link) const override;

 private:
  std::uint64_t seed_;
};

class ScaledScorer final : public LinkScorer {
 public:
  ScaledScorer(const LinkScorer& inner, double factor) : inner_(inner), factor_(factor) {}
  double score(const kg::KnowledgeGraph& graph, const Question& q, const kg::RelationLink& link) const override {
    return factor_ * inner_.score(graph, q, link);
  }

 private:
  const LinkScorer& inner_;
  double factor_;
};

// Descending by score; ties by the lexicographic order of relation labels.
std::vector<ScoredLink> score_links(const kg::KnowledgeGraph& graph, const Question& q,
                                    std::span<const kg::RelationLink> links, const LinkScorer& scorer);

struct ReasoningGraph {
  std::size_t hops = 0;
  std::vector<ScoredLink> selected_links;
  std::vector<kg::ReasoningPath> paths;
};

// Links within `hops` of any anchor, merged across anchors.
std::vector<kg::RelationLink> candidate_links(const kg::KnowledgeGraph& graph, const Question& q, std::size_t hops);

ReasoningGraph build_reasoning_graph(const kg::KnowledgeGraph& graph, const Question& q, std::size_t hops,
                                     const LinkScorer& scorer, std::size_t k, std::size_t cap);
ReasoningGraph build_reasoning_graph(const kg::KnowledgeGraph& graph, const Question& q, const HopClassifier& clf,
                                     const LinkScorer& scorer, std::size_t k, std::size_t cap);

}  // namespace kgprompt::retrieval
