#pragma once
// Run configuration. Files are plain `key = value` lines; '#' starts a comment.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "kgprompt/adapter/knowledge_adapter.hpp"
#include "kgprompt/numerics/ops.hpp"

namespace kgprompt::harness {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 4;
  double lr = 2e-3;
  std::uint64_t seed = 0;
  std::size_t k = 4;
  std::size_t cap = 8;
  std::size_t max_hops = 2;
  adapter::StructMode mode = adapter::StructMode::HplusRminusT;
  bool no_struct = false;
  bool no_train_encoder = false;
  bool random_retrieve = false;
  num::Reduction loss_reduction = num::Reduction::Mean;
  std::size_t adapter_dim = 64;
  std::size_t adapter_ff = 128;
  std::size_t adapter_heads = 2;
  bool init_labels_from_lm = true;
  bool tune_labels = true;
  std::size_t hop_dim = 32;
  std::size_t hop_epochs = 30;
  double hop_lr = 0.05;
  std::size_t max_new = 8;
};

struct LmSetup {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ff_dim = 256;
  std::size_t context = 256;
  std::size_t pretrain_steps = 1200;
  std::size_t pretrain_batch = 8;
  double pretrain_lr = 3e-3;
  std::size_t corpus_size = 20000;
  std::size_t max_slot_entities = 12;
};

struct SyntheticConfig {
  std::uint64_t seed = 0;
  std::size_t entities = 50;
  std::size_t relations = 10;
  std::size_t train = 100;
  std::size_t test = 20;
  std::size_t max_hops = 2;
  std::size_t out_degree = 3;
};

struct Config {
  TrainConfig train;
  LmSetup lm;
  SyntheticConfig data;

  // Throws std::invalid_argument on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  void load(std::istream& in);
  void load_file(const std::string& path);
  // Applies one seed to every random component.
  void set_seed(std::uint64_t seed);
  std::map<std::string, std::string> dump() const;
};

}  // namespace kgprompt::harness
