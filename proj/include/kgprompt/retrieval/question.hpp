#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgprompt/kg/knowledge_graph.hpp"

namespace kgprompt::retrieval {

struct Question {
  std::string text;
  std::vector<kg::EntityId> anchors;
  std::vector<std::string> gold_answers;
  std::optional<std::size_t> gold_hops;
};

class QuestionLoadError : public std::runtime_error {
 public:
  QuestionLoadError(std::size_t line, const std::string& what)
      : std::runtime_error("question line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// JSON lines: {"text": ..., "anchors": [labels], "answers": [...], "hops": n?}.
// Anchor labels are resolved against `graph`; `max_hops` (if nonzero) bounds "hops".
std::vector<Question> load_questions(std::istream& in, const kg::KnowledgeGraph& graph,
                                     std::size_t max_hops = 0);
std::vector<Question> load_questions_file(const std::string& path, const kg::KnowledgeGraph& graph,
                                          std::size_t max_hops = 0);
void write_questions(std::ostream& out, const kg::KnowledgeGraph& graph, const std::vector<Question>& qs);

}  // namespace kgprompt::retrieval
