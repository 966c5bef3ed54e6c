#pragma once
// Flat parameter archive.
//
// Layout: a plain-text manifest followed by a little-endian float32 payload.
//
//   KGPARCHIVE 1
//   meta <key> <value to end of line>
//   tensor <name> <rank> <dim>... <offset> <count>
//   end
//   <payload bytes>
//
// Offsets and counts are in floats relative to the start of the payload.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kgprompt/numerics/tensor.hpp"

namespace kgprompt::num {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchiveEntry {
  std::string name;
  Tensor<float> value;
};

struct Archive {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<ArchiveEntry> tensors;

  void set_meta(std::string key, std::string value);
  std::optional<std::string> meta_value(std::string_view key) const;
  std::string require_meta(std::string_view key) const;
  const ArchiveEntry* find(std::string_view name) const;

  void add(const ParameterStore<float>& store);
  // Copies archived values into same-named parameters; shapes must match and
  // every parameter must be present.
  void restore(ParameterStore<float>& store) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace kgprompt::num
