#pragma once

#include "kgprompt/lm/transformer_lm.hpp"
#include "kgprompt/retrieval/scoring.hpp"

namespace kgprompt::lm {

// Mean log-likelihood of the link's labels continued from the question.
class LmLinkScorer final : public retrieval::LinkScorer {
 public:
  LmLinkScorer(TransformerLM<float>& lm, const Tokenizer& tok) : lm_(lm), tok_(tok) {}
  double score(const kg::KnowledgeGraph& graph, const retrieval::Question& q,
               const kg::RelationLink& link) const override;

 private:
  TransformerLM<float>& lm_;
  const Tokenizer& tok_;
};

}  // namespace kgprompt::lm
