#include "kgprompt/adapter/knowledge_adapter.hpp"

namespace kgprompt::adapter {

std::string to_string(StructMode m) {
  return m == StructMode::HplusRminusT ? "h+r-t" : "h+r+t";
}

StructMode struct_mode_from_string(std::string_view s) {
  if (s == "h+r-t") return StructMode::HplusRminusT;
  if (s == "h+r+t") return StructMode::HplusRplusT;
  throw std::invalid_argument("unknown struct mode '" + std::string(s) + "' (expected h+r-t or h+r+t)");
}

std::uint64_t vocabulary_hash(const kg::KnowledgeGraph& graph) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    h = (h ^ 0xff) * 0x100000001b3ULL;
  };
  for (kg::EntityId e = 0; e < graph.entity_count(); ++e) feed(graph.entity_label(e));
  feed("|");
  for (kg::RelationId r = 0; r < graph.relation_count(); ++r) feed(graph.relation_label(r));
  return h;
}

}  // namespace kgprompt::adapter
