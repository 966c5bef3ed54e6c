#pragma once
// Finite-difference suites over every primitive and the composed adapter and
// LM losses, run in double precision.

#include <cstdint>
#include <string>
#include <vector>

namespace kgprompt::harness {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  std::string worst;
};

std::vector<SuiteResult> primitive_gradcheck(std::size_t cases, std::uint64_t seed);
std::vector<SuiteResult> composed_gradcheck(std::size_t cases, std::uint64_t seed);

}  // namespace kgprompt::harness
