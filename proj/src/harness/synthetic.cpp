#include "kgprompt/harness/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "kgprompt/retrieval/scoring.hpp"

namespace kgprompt::harness {

namespace {

constexpr const char* kRelationWords[] = {
    "capital", "founder", "spouse",  "author",  "director", "genre",   "leader",  "currency",
    "language", "sponsor", "mentor", "rival",   "owner",    "partner", "parent",  "editor",
    "coach",   "pilot",   "tutor",   "member",  "origin",   "host",    "label",   "brand",
    "region",  "anthem",  "patron",  "heir",    "sibling",  "ally",    "critic",  "rector",
    "warden",  "curator", "envoy",   "steward", "herald",   "vassal",  "scribe",  "oracle",
};
constexpr std::size_t kMaxRelations = std::size(kRelationWords) / 2;

// Deterministic consonant-vowel names, independent of the seed.
std::vector<std::string> entity_names(std::size_t n) {
  static constexpr std::string_view kC = "bdfgklmnprstvz";
  static constexpr std::string_view kV = "aeiou";
  std::set<std::string> reserved(std::begin(kRelationWords), std::end(kRelationWords));
  for (const char* w : {"what", "is", "the", "of", "name", "kb", "based", "on", "knowledge", "graphs", "please",
                        "answer", "given", "question", "keep", "as", "simple", "possible", "and", "return", "all",
                        "answers", "a", "list"}) {
    reserved.insert(w);
  }
  std::vector<std::string> all;
  for (char c1 : kC)
    for (char v1 : kV)
      for (char c2 : kC)
        for (char v2 : kV) all.push_back({c1, v1, c2, v2});
  // Fixed stride walk so neighbouring names differ.
  std::vector<std::string> out;
  const std::size_t m = all.size();
  for (std::size_t i = 0, j = 0; i < m && out.size() < n; ++i, j = (j + 977) % m) {
    if (!reserved.count(all[j])) out.push_back(all[j]);
  }
  if (out.size() < n) throw std::invalid_argument("gen_synthetic: too many entities requested");
  return out;
}

}  // namespace

std::vector<std::string> relation_words(const kg::KnowledgeGraph& graph, kg::RelationId r) {
  std::string label = graph.relation_label(r);
  if (label.starts_with("kb.")) label = label.substr(3);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t us = label.find('_'); ; us = label.find('_', start)) {
    out.push_back(label.substr(start, us == std::string::npos ? std::string::npos : us - start));
    if (us == std::string::npos) break;
    start = us + 1;
  }
  return out;
}

std::string question_text(const kg::KnowledgeGraph& graph, kg::EntityId anchor, const kg::RelationLink& link,
                          bool variant) {
  auto words = [&](kg::RelationId r) {
    std::string s;
    for (const auto& w : relation_words(graph, r)) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  std::string text = variant ? "name the " : "what is the ";
  for (std::size_t i = link.relations.size(); i-- > 0;) {
    text += words(link.relations[i]);
    text += i > 0 ? " of the " : " of ";
  }
  return text + graph.entity_label(anchor);
}

SyntheticData gen_synthetic(const SyntheticConfig& cfg) {
  if (cfg.entities < 2 || cfg.relations == 0 || cfg.train + cfg.test == 0 || cfg.out_degree == 0) {
    throw std::invalid_argument("gen_synthetic: sizes must be positive (and at least 2 entities)");
  }
  if (cfg.max_hops != 2 && cfg.max_hops != 4) throw std::invalid_argument("gen_synthetic: max_hops must be 2 or 4");
  if (cfg.relations > kMaxRelations) {
    throw std::invalid_argument("gen_synthetic: at most " + std::to_string(kMaxRelations) + " relations");
  }
  if (cfg.relations < cfg.max_hops) {
    throw std::invalid_argument("gen_synthetic: need at least max_hops relations for distinct-relation links");
  }
  std::mt19937_64 rng(cfg.seed);
  const auto names = entity_names(cfg.entities);
  std::vector<std::string> rels;
  for (std::size_t r = 0; r < cfg.relations; ++r) {
    rels.push_back(std::string("kb.") + kRelationWords[2 * r] + "_" + kRelationWords[2 * r + 1]);
  }

  kg::KnowledgeGraph::Builder builder;
  std::uniform_int_distribution<std::size_t> pick_entity(0, cfg.entities - 1);
  std::uniform_int_distribution<std::size_t> pick_relation(0, cfg.relations - 1);
  for (std::size_t e = 0; e < cfg.entities; ++e) {
    for (std::size_t j = 0; j < cfg.out_degree; ++j) {
      std::size_t t = pick_entity(rng);
      while (t == e) t = pick_entity(rng);
      builder.add(names[e], rels[pick_relation(rng)], names[t]);
    }
  }
  SyntheticData data{std::move(builder).build(), {}, {}, {}, {}};
  const kg::KnowledgeGraph& g = data.graph;

  retrieval::LexicalScorer lexical;
  std::set<std::pair<kg::EntityId, kg::RelationLink>> used;
  const std::size_t total = cfg.train + cfg.test;
  const std::size_t max_attempts = 2000 * total;
  std::size_t attempts = 0;
  std::vector<retrieval::Question> questions;
  std::vector<kg::RelationLink> links;
  std::uniform_int_distribution<std::size_t> coin(0, 1);
  while (questions.size() < total) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument("gen_synthetic: could not place " + std::to_string(total) +
                                  " distinct answerable questions in this graph");
    }
    const std::size_t hops = questions.size() % cfg.max_hops + 1;
    const auto anchor = static_cast<kg::EntityId>(pick_entity(rng));
    // Random walk with distinct relations.
    kg::RelationLink link;
    kg::EntityId at = anchor;
    bool ok = true;
    for (std::size_t h = 0; h < hops && ok; ++h) {
      std::vector<kg::Edge> options;
      for (const auto& e : g.out_edges(at)) {
        if (std::find(link.relations.begin(), link.relations.end(), e.relation) == link.relations.end()) {
          options.push_back(e);
        }
      }
      if (options.empty()) {
        ok = false;
        break;
      }
      const auto& e = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
      link.relations.push_back(e.relation);
      at = e.tail;
    }
    if (!ok || used.count({anchor, link})) continue;

    retrieval::Question q;
    q.text = question_text(g, anchor, link, coin(rng) == 1);
    q.anchors = {anchor};
    q.gold_hops = hops;
    // The gold link must be the unique best lexical match within H hops.
    const auto candidates = retrieval::candidate_links(g, q, cfg.max_hops);
    const double gold = lexical.score(g, q, link);
    bool unique = true;
    for (const auto& c : candidates) {
      if (c != link && lexical.score(g, q, c) >= gold) unique = false;
    }
    if (!unique) continue;
    std::vector<std::string> answers;
    for (const auto& p : kg::instantiate_paths(g, anchor, link, 1000)) {
      const auto& label = g.entity_label(p.terminal());
      if (std::find(answers.begin(), answers.end(), label) == answers.end()) answers.push_back(label);
    }
    if (answers.empty()) continue;
    q.gold_answers = std::move(answers);
    used.insert({anchor, link});
    questions.push_back(std::move(q));
    links.push_back(std::move(link));
  }
  // Interleaved hop counts; shuffle, then split.
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < total; ++i) {
    auto& qs = i < cfg.train ? data.train : data.test;
    auto& ls = i < cfg.train ? data.train_links : data.test_links;
    qs.push_back(questions[order[i]]);
    ls.push_back(links[order[i]]);
  }
  return data;
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  auto open = [&](const char* name) {
    std::ofstream out(base / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (base / name).string() + "'");
    return out;
  };
  {
    auto out = open("triples.tsv");
    data.graph.write_tsv(out);
  }
  {
    auto out = open("train.jsonl");
    retrieval::write_questions(out, data.graph, data.train);
  }
  {
    auto out = open("test.jsonl");
    retrieval::write_questions(out, data.graph, data.test);
  }
}

}  // namespace kgprompt::harness
