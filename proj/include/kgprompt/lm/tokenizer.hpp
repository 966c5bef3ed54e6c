#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgprompt::lm {

class Tokenizer {
 public:
  static constexpr std::size_t kBos = 0;
  static constexpr std::size_t kEos = 1;
  static constexpr std::size_t kUnk = 2;
  static constexpr std::size_t kGraphSlot = 3;
  static constexpr std::size_t kReserved = 4;

  Tokenizer();
  // Vocabulary from the pieces of every corpus string, in first-appearance order.
  static Tokenizer build(std::span<const std::string> corpus);
  static Tokenizer load(const std::string& path);
  void save(const std::string& path) const;

  // Whitespace separates words; each punctuation character is its own piece.
  static std::vector<std::string> pieces(std::string_view text);

  std::vector<std::size_t> encode(std::string_view text) const;
  // Reserved ids are dropped; punctuation spacing follows ordinary prose.
  std::string decode(std::span<const std::size_t> ids) const;

  std::size_t id(std::string_view piece) const;
  const std::string& piece(std::size_t id) const { return pieces_.at(id); }
  std::size_t size() const noexcept { return pieces_.size(); }
  std::size_t add(const std::string& piece);
  const std::vector<std::string>& vocabulary() const noexcept { return pieces_; }
  std::uint64_t hash() const;

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace kgprompt::lm
