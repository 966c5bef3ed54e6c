#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kgprompt/kg/knowledge_graph.hpp"
#include "kgprompt/kg/paths.hpp"
#include "oracles.hpp"

using namespace kgprompt::kg;

namespace {

KnowledgeGraph from_text(const std::string& text) {
  std::istringstream in(text);
  return KnowledgeGraph::load(in);
}

RelationLink link_of(const KnowledgeGraph& kg, std::initializer_list<const char*> labels) {
  RelationLink l;
  for (const char* s : labels) l.relations.push_back(*kg.find_relation(s));
  return l;
}

}  // namespace

TEST_CASE("load_triples counts and deduplicates") {
  SUBCASE("empty stream") {
    auto kg = from_text("");
    CHECK(kg.entity_count() == 0);
    CHECK(kg.relation_count() == 0);
    CHECK(kg.triple_count() == 0);
  }
  SUBCASE("two lines") {
    auto kg = from_text("a\tr1\tb\nb\tr2\tc\n");
    CHECK(kg.entity_count() == 3);
    CHECK(kg.relation_count() == 2);
    CHECK(kg.triple_count() == 2);
    CHECK(kg.entity_label(0) == "a");
    CHECK(kg.entity_label(1) == "b");
    CHECK(kg.entity_label(2) == "c");
  }
  SUBCASE("duplicate line collapses") {
    auto kg = from_text("a\tr1\tb\na\tr1\tb\n");
    CHECK(kg.triple_count() == 1);
  }
  SUBCASE("blank lines are ignored") {
    auto kg = from_text("\na\tr1\tb\n\n");
    CHECK(kg.triple_count() == 1);
  }
}

TEST_CASE("load_triples reports malformed lines with their number") {
  try {
    from_text("a\tr\tb\na\tr\n");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 2);
  }
  try {
    from_text("a\tr\tb\n\na\t\tb\n");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("relation") != std::string::npos);
  }
  CHECK_THROWS_AS(from_text("a\tr\tb\tc\n"), LoadError);
}

TEST_CASE("out-index mirrors the stored triples") {
  auto kg = from_text("a\tr2\tc\na\tr1\tb\na\tr1\ta\nb\tr1\tc\n");
  const EntityId a = kg.require_entity("a");
  std::vector<Edge> edges(kg.out_edges(a).begin(), kg.out_edges(a).end());
  CHECK(std::is_sorted(edges.begin(), edges.end()));
  CHECK(edges.size() == 3);
  std::size_t total = 0;
  for (EntityId e = 0; e < kg.entity_count(); ++e) {
    for (const Edge& edge : kg.out_edges(e)) {
      CHECK(kg.contains({e, edge.relation, edge.tail}));
      ++total;
    }
  }
  CHECK(total == kg.triple_count());
  CHECK(kg.out_edges(a, *kg.find_relation("r1")).size() == 2);
}

TEST_CASE("write then reload reproduces the graph") {
  const std::string text = "x\tq\ty\na\tr\tz\nx\tq\ty\nb\tr\ta\nz\tq\tx\n";
  auto kg = from_text(text);
  std::ostringstream out;
  kg.write_tsv(out);
  auto again = from_text(out.str());
  CHECK(again == kg);
  std::ostringstream out2;
  again.write_tsv(out2);
  CHECK(out2.str() == out.str());
}

TEST_CASE("enumerate_relation_links on a chain") {
  auto kg = from_text("a\tr1\tb\nb\tr2\tc\n");
  const EntityId a = kg.require_entity("a");
  auto two = enumerate_relation_links(kg, a, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == link_of(kg, {"r1"}));
  CHECK(two[1] == link_of(kg, {"r1", "r2"}));
  auto one = enumerate_relation_links(kg, a, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == link_of(kg, {"r1"}));
}

TEST_CASE("enumerate_relation_links rejects an unknown anchor") {
  auto kg = from_text("a\tr1\tb\n");
  try {
    enumerate_relation_links(kg, 17, 2);
    FAIL("expected UnknownEntityError");
  } catch (const UnknownEntityError& e) {
    CHECK(std::string(e.what()).find("17") != std::string::npos);
  }
}

TEST_CASE("enumerate_relation_links follows cycles up to the depth bound") {
  auto kg = from_text("a\tr\tb\nb\ts\ta\n");
  auto links = enumerate_relation_links(kg, kg.require_entity("a"), 3);
  REQUIRE(links.size() == 3);
  CHECK(links[2] == link_of(kg, {"r", "s", "r"}));
}

TEST_CASE("enumerate_relation_links matches brute-force path projection") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto kg = oracle::random_graph(seed, 8, 3, 14);
    if (kg.entity_count() == 0) continue;
    for (EntityId anchor = 0; anchor < kg.entity_count(); ++anchor) {
      const auto fast = enumerate_relation_links(kg, anchor, 3);
      const auto slow = oracle::brute_force_links(kg, anchor, 3);
      CHECK(std::set<RelationLink>(fast.begin(), fast.end()) == slow);
      CHECK(fast.size() == slow.size());
      CHECK(std::is_sorted(fast.begin(), fast.end()));
    }
  }
}

TEST_CASE("instantiate_paths") {
  SUBCASE("single realization of a chain") {
    auto kg = from_text("a\tr1\tb\nb\tr2\tc\n");
    auto paths = instantiate_paths(kg, kg.require_entity("a"), link_of(kg, {"r1", "r2"}), 10);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].origin == kg.require_entity("a"));
    REQUIRE(paths[0].steps.size() == 2);
    CHECK(paths[0].steps[0] == PathStep{*kg.find_relation("r1"), kg.require_entity("b")});
    CHECK(paths[0].steps[1] == PathStep{*kg.find_relation("r2"), kg.require_entity("c")});
  }
  SUBCASE("branching") {
    auto kg = from_text("a\tr1\tb\na\tr1\tb2\n");
    const auto link = link_of(kg, {"r1"});
    auto paths = instantiate_paths(kg, 0, link, 10);
    CHECK(paths.size() == oracle::brute_force_paths(kg, 0, link).size());
    CHECK(paths.size() == 2);
  }
  SUBCASE("absent relation") {
    auto kg = from_text("a\tr1\tb\n");
    CHECK(instantiate_paths(kg, 0, RelationLink{{9}}, 10).empty());
  }
  SUBCASE("cap bounds the result") {
    auto kg = from_text("a\tr\tb\na\tr\tc\na\tr\td\n");
    auto paths = instantiate_paths(kg, 0, link_of(kg, {"r"}), 2);
    REQUIRE(paths.size() == 2);
    CHECK(paths[0].terminal() == kg.require_entity("b"));
    CHECK(paths[1].terminal() == kg.require_entity("c"));
  }
}

TEST_CASE("instantiated paths validate and match the brute-force path set") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    auto kg = oracle::random_graph(seed, 7, 3, 12);
    for (EntityId anchor = 0; anchor < kg.entity_count(); ++anchor) {
      for (const auto& link : enumerate_relation_links(kg, anchor, 3)) {
        auto paths = instantiate_paths(kg, anchor, link, 1000);
        for (const auto& p : paths) {
          CHECK(validate_path(kg, p));
          CHECK(p.link() == link);
        }
        CHECK(std::set<ReasoningPath>(paths.begin(), paths.end()) ==
              oracle::brute_force_paths(kg, anchor, link));
        CHECK(std::is_sorted(paths.begin(), paths.end()));
      }
    }
  }
}

TEST_CASE("loading is deterministic") {
  const std::string text = "p\tx\tq\nq\ty\tr\nr\tx\tp\n";
  auto a = from_text(text);
  auto b = from_text(text);
  CHECK(a == b);
  CHECK(enumerate_relation_links(a, 0, 3) == enumerate_relation_links(b, 0, 3));
}
