#include "kgprompt/lm/link_scorer.hpp"

namespace kgprompt::lm {

double LmLinkScorer::score(const kg::KnowledgeGraph& graph, const retrieval::Question& q,
                           const kg::RelationLink& link) const {
  std::vector<std::size_t> prompt{Tokenizer::kBos};
  for (auto id : tok_.encode(q.text)) prompt.push_back(id);
  std::vector<std::size_t> cont;
  for (const auto& label : kg::link_labels(graph, link)) {
    for (auto id : tok_.encode(label)) cont.push_back(id);
  }
  if (cont.empty()) return 0.0;
  num::Tape<float> tape;
  auto nll = lm_.sequence_nll(tape, lm_.embed_tokens(tape, prompt), cont);
  return -static_cast<double>(nll.value().item());
}

}  // namespace kgprompt::lm
