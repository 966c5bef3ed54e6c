#include "kgprompt/lm/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace kgprompt::lm {

Tokenizer::Tokenizer() {
  for (const char* s : {"<bos>", "<eos>", "<unk>", "<graph>"}) add(s);
}

std::size_t Tokenizer::add(const std::string& piece) {
  auto [it, inserted] = index_.try_emplace(piece, pieces_.size());
  if (inserted) pieces_.push_back(piece);
  return it->second;
}

Tokenizer Tokenizer::build(std::span<const std::string> corpus) {
  Tokenizer tok;
  for (const auto& text : corpus) {
    for (const auto& p : pieces(text)) tok.add(p);
  }
  return tok;
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file '" + path + "'");
  Tokenizer tok;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n < kReserved) {
      if (line != tok.pieces_[n]) throw std::runtime_error("vocabulary file '" + path + "' has wrong reserved tokens");
    } else if (tok.add(line) != n) {
      throw std::runtime_error("vocabulary file '" + path + "' repeats token '" + line + "'");
    }
    ++n;
  }
  if (n < kReserved) throw std::runtime_error("vocabulary file '" + path + "' is truncated");
  return tok;
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file '" + path + "'");
  for (const auto& p : pieces_) out << p << '\n';
}

std::vector<std::string> Tokenizer::pieces(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::size_t Tokenizer::id(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Tokenizer::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& p : pieces(text)) ids.push_back(id(p));
  return ids;
}

std::string Tokenizer::decode(std::span<const std::size_t> ids) const {
  static constexpr std::string_view kNoSpaceBefore = ",.?!:;])}";
  static constexpr std::string_view kNoSpaceAfter = "[({";
  std::string out;
  bool suppress = true;
  for (std::size_t id : ids) {
    if (id < kReserved) continue;
    const std::string& p = pieces_.at(id);
    const bool tight = p.size() == 1 && kNoSpaceBefore.find(p[0]) != std::string_view::npos;
    if (!suppress && !tight) out += ' ';
    out += p;
    suppress = p.size() == 1 && kNoSpaceAfter.find(p[0]) != std::string_view::npos;
  }
  return out;
}

std::uint64_t Tokenizer::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : pieces_) {
    for (unsigned char c : p) h = (h ^ c) * 0x100000001b3ULL;
    h = (h ^ 0x0a) * 0x100000001b3ULL;
  }
  return h;
}

}  // namespace kgprompt::lm
