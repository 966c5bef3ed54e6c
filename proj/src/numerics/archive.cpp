#include "kgprompt/numerics/archive.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace kgprompt::num {
namespace {

constexpr std::string_view kMagic = "KGPARCHIVE 1";

void put_f32(std::ostream& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {static_cast<char>(bits & 0xFFu), static_cast<char>((bits >> 8) & 0xFFu),
                         static_cast<char>((bits >> 16) & 0xFFu),
                         static_cast<char>((bits >> 24) & 0xFFu)};
  out.write(bytes, 4);
}

float get_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

bool has_space(std::string_view s) {
  return s.find_first_of(" \t\r\n") != std::string_view::npos;
}

}  // namespace

void Archive::set_meta(std::string key, std::string value) {
  if (key.empty() || has_space(key)) throw ArchiveError("archive meta key must be a non-empty word: '" + key + "'");
  if (value.find('\n') != std::string::npos) throw ArchiveError("archive meta value for '" + key + "' contains a newline");
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  meta.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> Archive::meta_value(std::string_view key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string Archive::require_meta(std::string_view key) const {
  if (auto v = meta_value(key)) return *v;
  throw ArchiveError("archive is missing meta entry '" + std::string(key) + "'");
}

const ArchiveEntry* Archive::find(std::string_view name) const {
  for (const auto& e : tensors) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void Archive::add(const ParameterStore<float>& store) {
  for (const auto& p : store) tensors.push_back({p.name, p.value});
}

void Archive::restore(ParameterStore<float>& store) const {
  for (auto& p : store) {
    const ArchiveEntry* e = find(p.name);
    if (e == nullptr) throw ArchiveError("archive has no tensor named '" + p.name + "'");
    if (e->value.shape() != p.value.shape()) {
      throw ArchiveError("archive tensor '" + p.name + "' has shape " + shape_string(e->value.shape()) +
                         ", expected " + shape_string(p.value.shape()));
    }
    p.value = e->value;
  }
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError("cannot open '" + path.string() + "' for writing");
  out << kMagic << '\n';
  for (const auto& [k, v] : archive.meta) out << "meta " << k << ' ' << v << '\n';
  std::size_t offset = 0;
  for (const auto& e : archive.tensors) {
    if (e.name.empty() || has_space(e.name)) throw ArchiveError("tensor name must be a non-empty word: '" + e.name + "'");
    out << "tensor " << e.name << ' ' << e.value.rank();
    for (std::size_t d : e.value.shape()) out << ' ' << d;
    out << ' ' << offset << ' ' << e.value.size() << '\n';
    offset += e.value.size();
  }
  out << "end\n";
  for (const auto& e : archive.tensors) {
    for (float v : e.value.values()) put_f32(out, v);
  }
  if (!out) throw ArchiveError("failed writing '" + path.string() + "'");
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open archive '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw ArchiveError("'" + path.string() + "' is not a parameter archive");
  }
  struct Pending {
    std::string name;
    Shape shape;
    std::size_t offset;
    std::size_t count;
  };
  Archive archive;
  std::vector<Pending> pending;
  bool closed = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      closed = true;
      break;
    }
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    if (kind == "meta") {
      std::string key;
      fields >> key;
      std::string value;
      std::getline(fields, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      archive.meta.emplace_back(key, value);
    } else if (kind == "tensor") {
      Pending p;
      std::size_t rank = 0;
      fields >> p.name >> rank;
      p.shape.resize(rank);
      for (auto& d : p.shape) fields >> d;
      fields >> p.offset >> p.count;
      if (!fields || shape_size(p.shape) != p.count) {
        throw ArchiveError("malformed manifest line in '" + path.string() + "': " + line);
      }
      pending.push_back(std::move(p));
    } else {
      throw ArchiveError("unknown manifest line in '" + path.string() + "': " + line);
    }
  }
  if (!closed) throw ArchiveError("archive '" + path.string() + "' has no manifest terminator");
  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (auto& p : pending) {
    if ((p.offset + p.count) * 4 > payload.size()) {
      throw ArchiveError("archive '" + path.string() + "' payload truncated at tensor '" + p.name + "'");
    }
    std::vector<float> values(p.count);
    for (std::size_t i = 0; i < p.count; ++i) values[i] = get_f32(payload.data() + (p.offset + i) * 4);
    archive.tensors.push_back({p.name, Tensor<float>(p.shape, std::move(values))});
  }
  return archive;
}

}  // namespace kgprompt::num
