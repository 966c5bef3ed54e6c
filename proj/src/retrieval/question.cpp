#include "kgprompt/retrieval/question.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace kgprompt::retrieval {

using nlohmann::json;

std::vector<Question> load_questions(std::istream& in, const kg::KnowledgeGraph& graph, std::size_t max_hops) {
  std::vector<Question> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw QuestionLoadError(line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      Question q;
      q.text = j.at("text").get<std::string>();
      for (const auto& a : j.at("anchors")) {
        const auto label = a.get<std::string>();
        const auto id = graph.find_entity(label);
        if (!id) throw QuestionLoadError(line_no, "anchor '" + label + "' is not in the graph");
        q.anchors.push_back(*id);
      }
      if (q.anchors.empty()) throw QuestionLoadError(line_no, "no anchors");
      if (j.contains("answers")) q.gold_answers = j.at("answers").get<std::vector<std::string>>();
      if (j.contains("hops") && !j.at("hops").is_null()) {
        const auto h = j.at("hops").get<long long>();
        if (h < 1 || (max_hops != 0 && static_cast<std::size_t>(h) > max_hops)) {
          throw QuestionLoadError(line_no, "hops " + std::to_string(h) + " out of range");
        }
        q.gold_hops = static_cast<std::size_t>(h);
      }
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw QuestionLoadError(line_no, e.what());
    }
  }
  return out;
}

std::vector<Question> load_questions_file(const std::string& path, const kg::KnowledgeGraph& graph,
                                          std::size_t max_hops) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open question file '" + path + "'");
  return load_questions(in, graph, max_hops);
}

void write_questions(std::ostream& out, const kg::KnowledgeGraph& graph, const std::vector<Question>& qs) {
  for (const auto& q : qs) {
    json j;
    j["text"] = q.text;
    json anchors = json::array();
    for (auto a : q.anchors) anchors.push_back(graph.entity_label(a));
    j["anchors"] = anchors;
    j["answers"] = q.gold_answers;
    if (q.gold_hops) j["hops"] = *q.gold_hops;
    out << j.dump() << '\n';
  }
}

}  // namespace kgprompt::retrieval
