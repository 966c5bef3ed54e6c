#pragma once

#include <string>
#include <vector>

#include "kgprompt/lm/tokenizer.hpp"

namespace kgprompt::harness {

class PromptTemplate {
 public:
  // Both {question} and {graph} must occur exactly once.
  explicit PromptTemplate(std::string text);
  static PromptTemplate standard();

  const std::string& text() const noexcept { return text_; }
  // Text before and after {graph} once {question} is substituted.
  std::pair<std::string, std::string> split(const std::string& question) const;

 private:
  std::string text_;
};

// BOS, the tokenized template with the question substituted, and one graph
// slot where {graph} was.
std::vector<std::size_t> assemble_prompt(const PromptTemplate& tmpl, const lm::Tokenizer& tok,
                                         const std::string& question);

// The same prompt with `graph_text` in place of the slot, as raw pieces.
std::size_t textual_prompt_tokens(const PromptTemplate& tmpl, const std::string& question,
                                  const std::string& graph_text);

}  // namespace kgprompt::harness
