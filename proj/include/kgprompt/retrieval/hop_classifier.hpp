#pragma once
// Bag-of-words question encoder with a linear softmax head over hop counts.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgprompt/numerics/archive.hpp"
#include "kgprompt/numerics/ops.hpp"
#include "kgprompt/retrieval/question.hpp"

namespace kgprompt::retrieval {

struct HopTrainConfig {
  std::size_t max_hops = 2;
  std::size_t dim = 32;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

class HopClassifier {
 public:
  static constexpr std::size_t kUnk = 0;

  // Vocabulary is built from `corpus`; weights drawn from `seed`.
  HopClassifier(std::span<const std::string> corpus, std::size_t max_hops, std::size_t dim, std::uint64_t seed);

  static std::vector<std::string> words(std::string_view text);

  std::size_t max_hops() const noexcept { return max_hops_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::size_t token_id(std::string_view word) const;
  std::vector<std::size_t> token_ids(std::string_view text) const;

  num::Var<float> encode(num::Tape<float>& tape, std::string_view text);
  num::Var<float> logits(num::Tape<float>& tape, std::string_view text);
  num::Tensor<float> encode(std::string_view text) const;
  num::Tensor<float> logits(std::string_view text) const;
  std::vector<double> probabilities(std::string_view text) const;
  // Argmax over 1..H; ties go to the smaller hop count.
  std::size_t predict(std::string_view text) const;
  std::size_t predict(const Question& q) const { return predict(q.text); }

  num::ParameterStore<float>& params() noexcept { return params_; }
  const num::ParameterStore<float>& params() const noexcept { return params_; }

  num::Archive to_archive() const;
  static HopClassifier from_archive(const num::Archive& ar);

 private:
  HopClassifier() = default;
  void init_params(std::uint64_t seed);
  template <class Store>
  static num::Var<float> encode_impl(num::Tape<float>& tape, Store& store, const HopClassifier& self,
                                     std::string_view text);

  std::size_t max_hops_ = 2;
  std::size_t dim_ = 32;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  num::ParameterStore<float> params_;
  num::ParamId embed_ = 0, head_w_ = 0, head_b_ = 0;
};

struct HopTrainResult {
  double train_accuracy = 0.0;
  std::vector<double> epoch_loss;
};

// Every question must carry gold_hops within 1..cfg.max_hops.
HopClassifier train_hop_classifier(std::span<const Question> data, const HopTrainConfig& cfg,
                                   HopTrainResult* result = nullptr);

double hop_accuracy(const HopClassifier& clf, std::span<const Question> data);

}  // namespace kgprompt::retrieval
