#pragma once
// Seeded synthetic benchmark: a random graph plus template questions whose
// answers are the tails of a designated relation link.

#include <string>
#include <vector>

#include "kgprompt/harness/config.hpp"
#include "kgprompt/kg/paths.hpp"
#include "kgprompt/retrieval/question.hpp"

namespace kgprompt::harness {

struct SyntheticData {
  kg::KnowledgeGraph graph;
  std::vector<retrieval::Question> train;
  std::vector<retrieval::Question> test;
  std::vector<kg::RelationLink> train_links;  // gold link per question
  std::vector<kg::RelationLink> test_links;
};

// Throws std::invalid_argument when the sizes cannot be satisfied.
SyntheticData gen_synthetic(const SyntheticConfig& cfg);

// Writes triples.tsv, train.jsonl and test.jsonl into `dir`.
void write_synthetic(const SyntheticData& data, const std::string& dir);

// Words a relation label is built from; questions quote them.
std::vector<std::string> relation_words(const kg::KnowledgeGraph& graph, kg::RelationId r);

// Question text for a link anchored at `anchor`.
std::string question_text(const kg::KnowledgeGraph& graph, kg::EntityId anchor, const kg::RelationLink& link,
                          bool variant);

}  // namespace kgprompt::harness
