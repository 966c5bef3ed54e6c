#include "kgprompt/harness/answers.hpp"

#include <cctype>
#include <stdexcept>

namespace kgprompt::harness {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

}  // namespace

std::vector<std::string> parse_answer_list(std::string_view text) {
  std::string_view t = trim(text);
  const auto nl = t.find('\n');
  const auto open = t.find('[');
  const auto close = t.rfind(']');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    std::string_view body = t.substr(open + 1, close - open - 1);
    std::vector<std::string> out;
    std::string cur;
    char quote = 0;
    bool any = false;
    auto flush = [&] {
      auto item = unquote(cur);
      if (!item.empty()) out.push_back(std::move(item));
      cur.clear();
    };
    for (char c : body) {
      if (quote != 0) {
        if (c == quote) quote = 0;
        cur.push_back(c);
      } else if (c == '"' || c == '\'') {
        quote = c;
        cur.push_back(c);
      } else if (c == ',') {
        flush();
      } else {
        cur.push_back(c);
      }
      any = true;
    }
    if (any) flush();
    return out;
  }
  if (nl != std::string_view::npos) t = trim(t.substr(0, nl));
  if (t.empty()) return {};
  return {std::string(t)};
}

std::string normalize_answer(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::size_t b = 0, e = out.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(out[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(out[e - 1]))) --e;
  return std::string(trim(std::string_view(out).substr(b, e - b)));
}

int hits_at_1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  if (gold.empty()) throw std::invalid_argument("hits_at_1: empty gold answer set");
  if (predicted.empty()) return 0;
  const std::string top = normalize_answer(predicted.front());
  for (const auto& g : gold) {
    if (normalize_answer(g) == top) return 1;
  }
  return 0;
}

}  // namespace kgprompt::harness
