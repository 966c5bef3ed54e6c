#pragma once
// End-to-end training and evaluation.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kgprompt/adapter/knowledge_adapter.hpp"
#include "kgprompt/harness/config.hpp"
#include "kgprompt/harness/prompt.hpp"
#include "kgprompt/lm/transformer_lm.hpp"
#include "kgprompt/retrieval/scoring.hpp"

namespace kgprompt::harness {

using Adapter = adapter::KnowledgeAdapter<float>;
using LM = lm::TransformerLM<float>;

class FrozenDigestError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Vocabulary over the template, questions, answers and graph labels.
lm::Tokenizer build_tokenizer(const kg::KnowledgeGraph& graph, const std::vector<retrieval::Question>& questions,
                              const PromptTemplate& tmpl);

// "[ answer ]" followed by EOS.
std::vector<std::size_t> answer_target(const lm::Tokenizer& tok, const std::string& answer);

// Copy-task corpus: random entity labels stand in the graph slot and the
// answer is the first of them.
std::vector<lm::LmExample> lm_corpus(const kg::KnowledgeGraph& graph, const std::vector<retrieval::Question>& questions,
                                     const lm::Tokenizer& tok, const PromptTemplate& tmpl, const LmSetup& setup,
                                     std::uint64_t seed);

LM make_lm(const lm::Tokenizer& tok, const LmSetup& setup, std::uint64_t seed);

std::unique_ptr<retrieval::LinkScorer> make_scorer(const TrainConfig& cfg);

adapter::AdapterConfig adapter_config(const kg::KnowledgeGraph& graph, const TrainConfig& cfg, std::size_t lm_dim);

// Sets each label row to the mean LM embedding of the label's tokens.
void init_labels_from_lm(Adapter& a, const kg::KnowledgeGraph& graph, const lm::Tokenizer& tok, const LM& lm);

struct TrainResult {
  std::unique_ptr<Adapter> adapter;
  std::unique_ptr<retrieval::HopClassifier> classifier;
  double hop_train_accuracy = 0.0;
  std::vector<double> step_loss;
  std::string digest_before;
  std::string digest_after;
  std::size_t steps = 0;
};

// Trains the hop classifier (unless one is given), then the adapter against
// the frozen LM. Throws FrozenDigestError if the LM changed.
TrainResult train_adapter(const kg::KnowledgeGraph& graph, const std::vector<retrieval::Question>& train, LM& lm,
                          const lm::Tokenizer& tok, const TrainConfig& cfg,
                          const PromptTemplate& tmpl = PromptTemplate::standard(),
                          const retrieval::HopClassifier* classifier = nullptr);

struct QuestionTrace {
  std::string question;
  std::size_t predicted_hops = 0;
  std::vector<std::string> selected_links;
  std::size_t paths = 0;
  std::size_t hard_tokens = 0;
  std::size_t prompt_tokens = 0;     // hard tokens without the slot, plus one per path
  std::size_t embedding_rows = 0;    // rows actually passed to the LM
  std::size_t textual_prompt_tokens = 0;
  std::size_t textual_knowledge_tokens = 0;
  bool fallback = false;
  std::string generated;
  std::vector<std::string> predicted;
  std::vector<std::string> gold;
  int hit = 0;

  bool operator==(const QuestionTrace&) const = default;
};

struct EvalReport {
  double hits_at_1 = 0.0;
  std::size_t token_used = 0;
  std::size_t requests = 0;
  double npr = 0.0;
  double time_cost = 0.0;  // seconds
  std::size_t fallbacks = 0;
  std::size_t knowledge_tokens = 0;
  std::size_t textual_token_used = 0;
  std::size_t textual_knowledge_tokens = 0;
  std::vector<QuestionTrace> traces;

  bool operator==(const EvalReport&) const = default;
  bool same_except_time(const EvalReport& other) const;
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

double npr(std::size_t token_used, std::size_t requests);

EvalReport evaluate(const kg::KnowledgeGraph& graph, const std::vector<retrieval::Question>& test, LM& lm,
                    const lm::Tokenizer& tok, Adapter& adapter, const retrieval::HopClassifier& classifier,
                    const TrainConfig& cfg, const PromptTemplate& tmpl = PromptTemplate::standard());

}  // namespace kgprompt::harness
