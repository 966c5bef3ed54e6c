#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kgprompt::harness {

// A bracketed, comma-separated (optionally quoted) list; otherwise the trimmed
// text is a single answer.
std::vector<std::string> parse_answer_list(std::string_view text);

// Lowercase, trim, collapse inner whitespace, strip surrounding punctuation.
std::string normalize_answer(std::string_view s);

int hits_at_1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

}  // namespace kgprompt::harness
