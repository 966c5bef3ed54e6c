#include "kgprompt/harness/prompt.hpp"

#include <stdexcept>

namespace kgprompt::harness {

namespace {

std::size_t count(const std::string& s, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  for (std::string_view ph : {"{question}", "{graph}"}) {
    const auto n = count(text_, ph);
    if (n != 1) {
      throw std::invalid_argument("prompt template must contain " + std::string(ph) + " exactly once (found " +
                                  std::to_string(n) + ")");
    }
  }
}

PromptTemplate PromptTemplate::standard() {
  return PromptTemplate(
      "Based on the knowledge graphs, please answer the given question. Please keep the answer as simple as "
      "possible and return all the possible answers as a list. knowledge graphs: {graph} question: {question} "
      "answer:");
}

std::pair<std::string, std::string> PromptTemplate::split(const std::string& question) const {
  // Split first so a question that happens to contain "{graph}" stays text.
  const auto g = text_.find("{graph}");
  const auto q = text_.find("{question}");
  std::string before = text_.substr(0, g);
  std::string after = text_.substr(g + 7);
  if (q < g) {
    before.replace(q, 10, question);
  } else {
    after.replace(q - g - 7, 10, question);
  }
  return {before, after};
}

std::vector<std::size_t> assemble_prompt(const PromptTemplate& tmpl, const lm::Tokenizer& tok,
                                         const std::string& question) {
  const auto [before, after] = tmpl.split(question);
  std::vector<std::size_t> ids{lm::Tokenizer::kBos};
  for (auto id : tok.encode(before)) ids.push_back(id);
  ids.push_back(lm::Tokenizer::kGraphSlot);
  for (auto id : tok.encode(after)) ids.push_back(id);
  return ids;
}

std::size_t textual_prompt_tokens(const PromptTemplate& tmpl, const std::string& question,
                                  const std::string& graph_text) {
  const auto [before, after] = tmpl.split(question);
  return 1 + lm::Tokenizer::pieces(before).size() + lm::Tokenizer::pieces(graph_text).size() +
         lm::Tokenizer::pieces(after).size();
}

}  // namespace kgprompt::harness
