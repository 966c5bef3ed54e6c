#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kgprompt/retrieval/hop_classifier.hpp"
#include "kgprompt/retrieval/question.hpp"
#include "kgprompt/retrieval/scoring.hpp"
#include "oracles.hpp"

using namespace kgprompt;
using namespace kgprompt::retrieval;
using kg::KnowledgeGraph;
using kg::RelationLink;

namespace {

KnowledgeGraph from_text(const std::string& text) {
  std::istringstream in(text);
  return KnowledgeGraph::load(in);
}

RelationLink link_of(const KnowledgeGraph& g, std::initializer_list<const char*> labels) {
  RelationLink l;
  for (const char* s : labels) l.relations.push_back(*g.find_relation(s));
  return l;
}

Question ask(const KnowledgeGraph& g, std::string text, std::initializer_list<const char*> anchors) {
  Question q{std::move(text), {}, {}, std::nullopt};
  for (const char* a : anchors) q.anchors.push_back(g.require_entity(a));
  return q;
}

std::vector<std::string> labels_of(const KnowledgeGraph& g, const RelationLink& l) { return kg::link_labels(g, l); }

// Fixed scores keyed by "r1>r2>..."; unlisted links score 0.
class TableScorer final : public LinkScorer {
 public:
  explicit TableScorer(std::map<std::string, double> t) : t_(std::move(t)) {}
  double score(const KnowledgeGraph& g, const Question&, const RelationLink& l) const override {
    std::string key;
    for (const auto& s : kg::link_labels(g, l)) key += (key.empty() ? "" : ">") + s;
    auto it = t_.find(key);
    return it == t_.end() ? 0.0 : it->second;
  }

 private:
  std::map<std::string, double> t_;
};

}  // namespace

TEST_CASE("lexical tokens split labels and lowercase") {
  CHECK(lexical_tokens("base.popstra.Celebrity.substance_abuse") ==
        std::vector<std::string>{"base", "popstra", "celebrity", "substance", "abuse"});
  CHECK(lexical_tokens("Who founded IMVU?") == std::vector<std::string>{"who", "founded", "imvu"});
  CHECK(lexical_tokens("  ").empty());
}

TEST_CASE("overlap scoring ranks the matching link first") {
  auto g = from_text("eric\tfounded\timvu\neric\tborn_in\tboston\n");
  auto q = ask(g, "who founded imvu", {"eric"});
  LexicalScorer lex;
  CHECK(lex.score(g, q, link_of(g, {"founded"})) == doctest::Approx(1.0));
  CHECK(lex.score(g, q, link_of(g, {"born_in"})) == doctest::Approx(0.0));
  const RelationLink links[] = {link_of(g, {"born_in"}), link_of(g, {"founded"})};
  auto ranked = score_links(g, q, links, lex);
  REQUIRE(ranked.size() == 2);
  CHECK(labels_of(g, ranked[0].link) == std::vector<std::string>{"founded"});
}

TEST_CASE("score ties fall back to label order") {
  auto g = from_text("a\tzeta\tb\na\talpha\tc\na\tmid\td\n");
  auto q = ask(g, "nothing in common", {"a"});
  const RelationLink links[] = {link_of(g, {"zeta"}), link_of(g, {"mid"}), link_of(g, {"alpha"})};
  auto ranked = score_links(g, q, links, LexicalScorer{});
  CHECK(labels_of(g, ranked[0].link)[0] == "alpha");
  CHECK(labels_of(g, ranked[1].link)[0] == "mid");
  CHECK(labels_of(g, ranked[2].link)[0] == "zeta");
  CHECK_THROWS_AS(score_links(g, q, std::span<const RelationLink>{}, LexicalScorer{}), std::invalid_argument);
}

TEST_CASE("case-study substance-abuse links are both retained") {
  auto g = from_text(
      "lindsay lohan\tbase.popstra.celebrity.substance_abuse\tm.abuse1\n"
      "m.abuse1\tbase.popstra.substance_abuse.substance\tcocaine\n"
      "m.abuse1\tbase.popstra.substance_abuse.abuser\tlindsay lohan\n"
      "lindsay lohan\tpeople.person.place_of_birth\tnew york\n"
      "new york\tlocation.location.containedby\tusa\n"
      "lindsay lohan\tfilm.actor.film\tm.perf\n"
      "m.perf\tfilm.performance.film\tmean girls\n"
      "lindsay lohan\tpeople.person.profession\tactor\n");
  auto q = ask(g, "what drugs lindsay lohan abuse?", {"lindsay lohan"});
  auto rg = build_reasoning_graph(g, q, 2, LexicalScorer{}, 4, 8);
  std::set<std::vector<std::string>> chosen;
  for (const auto& s : rg.selected_links) chosen.insert(labels_of(g, s.link));
  CHECK(chosen.count({"base.popstra.celebrity.substance_abuse", "base.popstra.substance_abuse.substance"}) == 1);
  CHECK(chosen.count({"base.popstra.celebrity.substance_abuse", "base.popstra.substance_abuse.abuser"}) == 1);
  CHECK(rg.selected_links.size() == 4);
}

TEST_CASE("hop prediction") {
  SUBCASE("case-study question is two hops under matching annotations") {
    std::vector<Question> data;
    const char* two[] = {"what drugs lindsay lohan abuse?", "what drugs did the singer abuse?",
                         "which substance did the actor abuse?", "what drugs did the band member abuse?"};
    const char* one[] = {"where was lindsay lohan born?", "who founded imvu?", "where was the singer born?",
                         "what is the capital of france?"};
    for (const char* t : two) data.push_back({t, {0}, {}, 2});
    for (const char* t : one) data.push_back({t, {0}, {}, 1});
    HopTrainConfig cfg;
    auto clf = train_hop_classifier(data, cfg);
    CHECK(clf.predict("what drugs lindsay lohan abuse?") == 2);
  }
  SUBCASE("marker-token dataset is learned") {
    std::mt19937_64 rng(5);
    const char* filler[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
    std::vector<Question> data;
    for (int i = 0; i < 200; ++i) {
      std::string text;
      for (int w = 0; w < 5; ++w) text += std::string(filler[rng() % 8]) + " ";
      const std::size_t hops = 1 + (i % 2);
      text += hops == 2 ? "twohop" : "onehop";
      data.push_back({text, {0}, {}, hops});
    }
    HopTrainResult res;
    auto clf = train_hop_classifier(data, HopTrainConfig{}, &res);
    CHECK(res.train_accuracy >= 0.95);
    CHECK(hop_accuracy(clf, data) == doctest::Approx(res.train_accuracy));
  }
  SUBCASE("probabilities sum to one and predictions stay in range") {
    const std::string corpus[] = {"a b c"};
    HopClassifier clf(corpus, 4, 8, 3);
    for (const char* t : {"a", "a b", "zzz unknown", "c c c b"}) {
      const auto p = clf.probabilities(t);
      double s = 0;
      for (double v : p) s += v;
      CHECK(std::abs(s - 1.0) < 1e-6);
      const auto h = clf.predict(t);
      CHECK(h >= 1);
      CHECK(h <= 4);
    }
  }
  SUBCASE("encoding is the mean of token rows") {
    const std::string corpus[] = {"red blue"};
    HopClassifier clf(corpus, 2, 4, 9);
    const auto red = clf.encode("red"), blue = clf.encode("blue"), both = clf.encode("red blue");
    for (std::size_t j = 0; j < 4; ++j) CHECK(both[j] == doctest::Approx((red[j] + blue[j]) / 2));
    CHECK(clf.encode("never seen") == clf.encode("also unseen"));
    CHECK_THROWS(clf.encode("   "));
  }
  SUBCASE("missing labels are an error") {
    std::vector<Question> data{{"has no label", {0}, {}, std::nullopt}};
    CHECK_THROWS_AS(train_hop_classifier(data, HopTrainConfig{}), std::invalid_argument);
  }
}

TEST_CASE("reasoning graph examples") {
  SUBCASE("chain with forced hops") {
    auto g = from_text("a\tr1\tb\nb\tr2\tc\n");
    auto q = ask(g, "the r1 r2 of a", {"a"});
    TableScorer favour({{"r1>r2", 1.0}});
    auto rg = build_reasoning_graph(g, q, 2, favour, 1, 8);
    REQUIRE(rg.paths.size() == 1);
    CHECK(kg::render_path(g, rg.paths[0]) == kg::render_path(g, kg::ReasoningPath{
                                                                       *g.find_entity("a"),
                                                                       {{*g.find_relation("r1"), *g.find_entity("b")},
                                                                        {*g.find_relation("r2"), *g.find_entity("c")}}}));
  }
  SUBCASE("top-k cuts three candidates to two") {
    auto g = from_text("a\tx\tb\na\ty\tc\na\tz\td\n");
    auto rg = build_reasoning_graph(g, ask(g, "q", {"a"}), 1, LexicalScorer{}, 2, 8);
    CHECK(rg.selected_links.size() == 2);
    CHECK(rg.paths.size() == 2);
  }
  SUBCASE("no links gives an empty graph") {
    auto g = from_text("a\tx\tb\n");
    auto rg = build_reasoning_graph(g, ask(g, "q", {"b"}), 2, LexicalScorer{}, 4, 8);
    CHECK(rg.selected_links.empty());
    CHECK(rg.paths.empty());
  }
}

TEST_CASE("selection matches a brute-force score-all oracle") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto g = oracle::random_graph(seed, 8, 3, 14);
    const kg::EntityId anchor = static_cast<kg::EntityId>(seed % g.entity_count());
    Question q{"r0 r2 e1", {anchor}, {}, std::nullopt};
    const RandomScorer scorer(seed);
    const std::size_t k = 1 + seed % 4, cap = 1 + seed % 3;
    auto rg = build_reasoning_graph(g, q, 2, scorer, k, cap);

    auto all = oracle::brute_force_links(g, anchor, 2);
    std::vector<std::pair<double, std::vector<std::string>>> ranked;
    for (const auto& l : all) ranked.push_back({-scorer.score(g, q, l), kg::link_labels(g, l)});
    std::sort(ranked.begin(), ranked.end());
    ranked.resize(std::min(k, ranked.size()));

    REQUIRE(rg.selected_links.size() == ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      CHECK(kg::link_labels(g, rg.selected_links[i].link) == ranked[i].second);
    }
    CHECK(rg.paths.size() <= k * cap);
    for (const auto& p : rg.paths) {
      CHECK(kg::validate_path(g, p));
      const bool listed = std::any_of(rg.selected_links.begin(), rg.selected_links.end(),
                                      [&](const ScoredLink& s) { return s.link == p.link(); });
      CHECK(listed);
    }
  }
}

TEST_CASE("positive rescaling leaves the selection unchanged") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = oracle::random_graph(seed + 100, 9, 3, 16);
    Question q{"r1 e2", {0}, {}, std::nullopt};
    const RandomScorer base(seed);
    for (double f : {0.5, 3.0, 1e3}) {
      const ScaledScorer scaled(base, f);
      auto a = build_reasoning_graph(g, q, 3, base, 3, 4);
      auto b = build_reasoning_graph(g, q, 3, scaled, 3, 4);
      REQUIRE(a.selected_links.size() == b.selected_links.size());
      for (std::size_t i = 0; i < a.selected_links.size(); ++i) CHECK(a.selected_links[i].link == b.selected_links[i].link);
      CHECK(a.paths == b.paths);
    }
  }
}

TEST_CASE("random scorer is seeded and bounded") {
  auto g = from_text("a\tx\tb\na\ty\tc\n");
  auto q = ask(g, "q", {"a"});
  const RandomScorer s1(1), s1b(1), s2(2);
  const auto l = link_of(g, {"x"});
  CHECK(s1.score(g, q, l) == s1b.score(g, q, l));
  CHECK(s1.score(g, q, l) != s2.score(g, q, l));
  CHECK(s1.score(g, q, l) >= 0.0);
  CHECK(s1.score(g, q, l) < 1.0);
}

TEST_CASE("multiple anchors union their links") {
  auto g = from_text("a\tx\tb\nc\ty\td\n");
  auto links = candidate_links(g, ask(g, "q", {"a", "c"}), 1);
  CHECK(links.size() == 2);
}

TEST_CASE("question loading") {
  auto g = from_text("a\tx\tb\n");
  SUBCASE("valid lines") {
    std::istringstream in(R"({"text": "what is x of a", "anchors": ["a"], "answers": ["b"], "hops": 1})"
                          "\n\n"
                          R"({"text": "and again", "anchors": ["a"], "answers": []})"
                          "\n");
    auto qs = load_questions(in, g, 2);
    REQUIRE(qs.size() == 2);
    CHECK(qs[0].anchors == std::vector<kg::EntityId>{0});
    CHECK(qs[0].gold_hops == 1u);
    CHECK_FALSE(qs[1].gold_hops.has_value());
    std::ostringstream out;
    write_questions(out, g, qs);
    std::istringstream back(out.str());
    auto again = load_questions(back, g, 2);
    CHECK(again[0].text == qs[0].text);
    CHECK(again[0].gold_answers == qs[0].gold_answers);
  }
  SUBCASE("errors name the line") {
    auto fails = [&](const std::string& text) {
      std::istringstream in(text);
      try {
        load_questions(in, g, 2);
      } catch (const QuestionLoadError& e) {
        return e.line();
      }
      return std::size_t{0};
    };
    CHECK(fails(R"({"text": "t", "anchors": ["nobody"], "answers": []})") == 1);
    CHECK(fails("{\"text\": \"t\", \"anchors\": [\"a\"], \"answers\": []}\n{\"text\": \"t\", \"anchors\": []}") == 2);
    CHECK(fails(R"({"text": "t", "anchors": ["a"], "answers": [], "hops": 3})") == 1);
    CHECK(fails("not json") == 1);
  }
}
