#pragma once
// Small decoder-only language model with soft-token injection.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgprompt/lm/tokenizer.hpp"
#include "kgprompt/numerics/archive.hpp"
#include "kgprompt/numerics/layers.hpp"

namespace kgprompt::lm {

using num::Reduction;
using num::Tape;
using num::Tensor;
using num::Var;

class ContextError : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct LmConfig {
  std::size_t vocab = 0;
  std::size_t dim = 64;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ff_dim = 256;
  std::size_t context = 256;
};

// Hard token ids with exactly one graph slot, plus the soft vectors (rows of
// width d_lm) that replace it.
template <std::floating_point T>
struct MixedPrompt {
  std::vector<std::size_t> hard;
  std::vector<Var<T>> soft;
};

// What the harness needs from a backend.
template <std::floating_point T>
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t width() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t context() const = 0;
  virtual Var<T> embed_tokens(Tape<T>& tape, std::span<const std::size_t> ids) = 0;
  // (length x width) embeddings -> (length x vocab) logits.
  virtual Var<T> forward(Tape<T>& tape, const Var<T>& embeddings) = 0;
};

inline std::size_t slot_position(std::span<const std::size_t> hard);

template <std::floating_point T>
class TransformerLM final : public LanguageModel<T> {
 public:
  TransformerLM(const LmConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.vocab <= Tokenizer::kReserved) throw std::invalid_argument("TransformerLM: vocabulary too small");
    std::mt19937_64 rng(seed);
    tok_ = store_.add("lm.tok_embed", num::uniform_matrix<T>(cfg.vocab, cfg.dim, cfg.dim, rng));
    pos_ = store_.add("lm.pos_embed", num::uniform_matrix<T>(cfg.context, cfg.dim, cfg.dim, rng));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      blocks_.push_back(num::add_block_params(store_, "lm.block" + std::to_string(l) + ".", cfg.dim, cfg.ff_dim, rng));
    }
    lnf_gain_ = store_.add("lm.ln_f.gain", Tensor<T>(num::Shape{1, cfg.dim}, T{1}));
    lnf_bias_ = store_.add("lm.ln_f.bias", Tensor<T>(num::Shape{1, cfg.dim}));
    out_w_ = store_.add("lm.out.weight", num::uniform_matrix<T>(cfg.dim, cfg.vocab, cfg.dim, rng));
    out_b_ = store_.add("lm.out.bias", Tensor<T>(num::Shape{1, cfg.vocab}));
  }

  const LmConfig& config() const noexcept { return cfg_; }
  std::size_t width() const override { return cfg_.dim; }
  std::size_t vocab_size() const override { return cfg_.vocab; }
  std::size_t context() const override { return cfg_.context; }

  num::ParameterStore<T>& params() noexcept { return store_; }
  const num::ParameterStore<T>& params() const noexcept { return store_; }
  std::size_t parameter_count() const { return store_.scalar_count(); }

  void freeze() { store_.set_trainable("lm.", false); }
  void unfreeze() { store_.set_trainable("lm.", true); }
  bool frozen() const {
    for (const auto& p : store_) {
      if (p.trainable) return false;
    }
    return true;
  }

  Var<T> embed_tokens(Tape<T>& tape, std::span<const std::size_t> ids) override {
    for (auto id : ids) {
      if (id >= cfg_.vocab) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
    }
    return num::gather_rows(tape.parameter(store_[tok_]), ids);
  }

  Var<T> forward(Tape<T>& tape, const Var<T>& x) override {
    const std::size_t n = x.rows();
    if (x.cols() != cfg_.dim) {
      throw num::ShapeError("lm forward: embedding width " + std::to_string(x.cols()) + " != " +
                            std::to_string(cfg_.dim));
    }
    if (n > cfg_.context) {
      throw ContextError("sequence of " + std::to_string(n) + " positions exceeds the context limit of " +
                         std::to_string(cfg_.context));
    }
    Var<T> h = num::add(x, num::slice_rows(tape.parameter(store_[pos_]), 0, n));
    for (const auto& b : blocks_) h = num::transformer_block(tape, store_, b, h, cfg_.heads, true);
    h = num::layer_norm(h, tape.parameter(store_[lnf_gain_]), tape.parameter(store_[lnf_bias_]));
    return num::linear(h, tape.parameter(store_[out_w_]), tape.parameter(store_[out_b_]));
  }

  // The slot expands to the soft rows verbatim; with no soft rows it vanishes.
  Var<T> embed_mixed(Tape<T>& tape, const MixedPrompt<T>& prompt) {
    const std::size_t slot = slot_position(prompt.hard);
    std::vector<Var<T>> parts;
    if (slot > 0) parts.push_back(embed_tokens(tape, std::span(prompt.hard).first(slot)));
    for (const auto& s : prompt.soft) {
      if (s.cols() != cfg_.dim) {
        throw num::ShapeError("embed_mixed: soft vector width " + std::to_string(s.cols()) + " != " +
                              std::to_string(cfg_.dim));
      }
      parts.push_back(s);
    }
    if (slot + 1 < prompt.hard.size()) parts.push_back(embed_tokens(tape, std::span(prompt.hard).subspan(slot + 1)));
    if (parts.empty()) throw std::invalid_argument("embed_mixed: prompt is empty");
    return parts.size() == 1 ? parts.front() : num::concat<T>(parts, 0);
  }

  // Teacher-forced loss over answer positions only.
  Var<T> sequence_nll(Tape<T>& tape, const Var<T>& prompt_embeddings, std::span<const std::size_t> answer,
                      Reduction reduction = Reduction::Mean) {
    if (answer.empty()) throw std::invalid_argument("answer_nll: empty answer");
    const std::size_t p = prompt_embeddings.rows();
    Var<T> seq = prompt_embeddings;
    if (answer.size() > 1) {
      std::vector<Var<T>> parts{prompt_embeddings, embed_tokens(tape, answer.first(answer.size() - 1))};
      seq = num::concat<T>(parts, 0);
    }
    Var<T> logits = forward(tape, seq);
    return num::cross_entropy(num::slice_rows(logits, p - 1, answer.size()), answer, reduction);
  }

  Var<T> answer_nll(Tape<T>& tape, const MixedPrompt<T>& prompt, std::span<const std::size_t> answer,
                    Reduction reduction = Reduction::Mean) {
    return sequence_nll(tape, embed_mixed(tape, prompt), answer, reduction);
  }

  // Greedy decoding; never emits BOS or the graph slot; ties go to the smaller id.
  std::vector<std::size_t> generate_greedy(std::span<const std::size_t> hard, std::span<const Tensor<T>> soft,
                                           std::size_t max_new) {
    std::vector<std::size_t> out;
    if (max_new == 0) return out;
    for (std::size_t step = 0; step < max_new; ++step) {
      Tape<T> tape;
      MixedPrompt<T> prompt{std::vector<std::size_t>(hard.begin(), hard.end()), {}};
      for (const auto& s : soft) prompt.soft.push_back(tape.constant(s));
      Var<T> seq = embed_mixed(tape, prompt);
      if (!out.empty()) {
        std::vector<Var<T>> parts{seq, embed_tokens(tape, out)};
        seq = num::concat<T>(parts, 0);
      }
      const Var<T> logits = forward(tape, seq);
      const auto row = logits.value().row(logits.rows() - 1);
      std::size_t best = Tokenizer::kEos;
      for (std::size_t v = 0; v < row.size(); ++v) {
        if (v == Tokenizer::kBos || v == Tokenizer::kGraphSlot) continue;
        if (row[v] > row[best] || (row[v] == row[best] && v < best)) best = v;
      }
      if (best == Tokenizer::kEos) break;
      out.push_back(best);
    }
    return out;
  }

  // FNV-1a over names, shapes and raw values, in registration order.
  std::string freeze_digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 0x100000001b3ULL;
    };
    for (const auto& p : store_) {
      feed(p.name.data(), p.name.size());
      for (auto d : p.value.shape()) {
        const std::uint64_t dd = d;
        feed(&dd, sizeof dd);
      }
      feed(p.value.data(), p.value.size() * sizeof(T));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  num::Archive to_archive() const
    requires std::same_as<T, float>
  {
    num::Archive ar;
    ar.set_meta("kind", "lm");
    ar.set_meta("vocab", std::to_string(cfg_.vocab));
    ar.set_meta("dim", std::to_string(cfg_.dim));
    ar.set_meta("heads", std::to_string(cfg_.heads));
    ar.set_meta("layers", std::to_string(cfg_.layers));
    ar.set_meta("ff_dim", std::to_string(cfg_.ff_dim));
    ar.set_meta("context", std::to_string(cfg_.context));
    ar.add(store_);
    return ar;
  }

  static TransformerLM from_archive(const num::Archive& ar)
    requires std::same_as<T, float>
  {
    if (ar.require_meta("kind") != "lm") throw num::ArchiveError("archive is not a language model");
    LmConfig cfg;
    cfg.vocab = std::stoul(ar.require_meta("vocab"));
    cfg.dim = std::stoul(ar.require_meta("dim"));
    cfg.heads = std::stoul(ar.require_meta("heads"));
    cfg.layers = std::stoul(ar.require_meta("layers"));
    cfg.ff_dim = std::stoul(ar.require_meta("ff_dim"));
    cfg.context = std::stoul(ar.require_meta("context"));
    TransformerLM lm(cfg, 0);
    ar.restore(lm.store_);
    lm.freeze();
    return lm;
  }

  template <std::floating_point U>
  TransformerLM<U> cast() const {
    TransformerLM<U> other(cfg_, 0);
    auto src = store_.begin();
    for (auto& p : other.params()) {
      p.value = src->value.template cast<U>();
      p.set_trainable(src->trainable);
      ++src;
    }
    return other;
  }

 private:
  LmConfig cfg_;
  num::ParameterStore<T> store_;
  num::ParamId tok_ = 0, pos_ = 0, lnf_gain_ = 0, lnf_bias_ = 0, out_w_ = 0, out_b_ = 0;
  std::vector<num::BlockParams> blocks_;
};

inline std::size_t slot_position(std::span<const std::size_t> hard) {
  std::size_t found = hard.size();
  for (std::size_t i = 0; i < hard.size(); ++i) {
    if (hard[i] != Tokenizer::kGraphSlot) continue;
    if (found != hard.size()) throw std::invalid_argument("mixed prompt has more than one graph slot");
    found = i;
  }
  if (found == hard.size()) throw std::invalid_argument("mixed prompt has no graph slot");
  return found;
}

struct LmExample {
  std::vector<std::size_t> prompt;  // hard ids, no slot
  std::vector<std::size_t> answer;
};

struct PretrainConfig {
  std::size_t steps = 1500;
  std::size_t batch_size = 8;
  double lr = 3e-3;
  std::uint64_t seed = 0;
};

// Trains every LM parameter on answer-span loss, then freezes the model.
std::vector<double> pretrain(TransformerLM<float>& lm, std::span<const LmExample> corpus, const PretrainConfig& cfg);

}  // namespace kgprompt::lm
