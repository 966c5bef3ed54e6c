#pragma once
// Path encoder: label embeddings, structural triple embeddings, a one-block
// knowledge encoder with a readout token, and a per-path projector into the
// language model's embedding space.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgprompt/kg/paths.hpp"
#include "kgprompt/numerics/archive.hpp"
#include "kgprompt/numerics/layers.hpp"

namespace kgprompt::adapter {

using num::Tape;
using num::Tensor;
using num::Var;

enum class StructMode { HplusRminusT, HplusRplusT };

std::string to_string(StructMode m);
StructMode struct_mode_from_string(std::string_view s);

struct AdapterConfig {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t dim = 64;
  std::size_t ff_dim = 128;   // projector hidden width
  std::size_t lm_dim = 64;
  std::size_t heads = 2;
  std::size_t max_hops = 2;
  StructMode mode = StructMode::HplusRminusT;
  bool use_struct = true;
};

// Order-stable hash of a graph's entity and relation labels.
std::uint64_t vocabulary_hash(const kg::KnowledgeGraph& graph);

template <std::floating_point T>
class KnowledgeAdapter {
 public:
  KnowledgeAdapter(const AdapterConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.entities == 0 || cfg.dim == 0 || cfg.max_hops == 0 || cfg.lm_dim == 0) {
      throw std::invalid_argument("KnowledgeAdapter: sizes must be positive");
    }
    const std::size_t d = cfg.dim;
    std::mt19937_64 rng(seed);
    labels_ = store_.add("embed.labels", num::uniform_matrix<T>(cfg.entities + cfg.relations, d, d, rng));
    struct_w_ = store_.add("struct.weight", num::uniform_matrix<T>(cfg.max_hops * d, d, cfg.max_hops * d, rng));
    struct_b_ = store_.add("struct.bias", Tensor<T>(num::Shape{1, d}));
    readout_ = store_.add("encoder.readout", num::uniform_matrix<T>(1, d, d, rng));
    in_w_ = store_.add("encoder.in.weight", num::uniform_matrix<T>(3 * d, d, 3 * d, rng));
    in_b_ = store_.add("encoder.in.bias", Tensor<T>(num::Shape{1, d}));
    block_ = num::add_block_params(store_, "encoder.block.", d, 4 * d, rng);
    p1_w_ = store_.add("projector.l1.weight", num::uniform_matrix<T>(d, cfg.ff_dim, d, rng));
    p1_b_ = store_.add("projector.l1.bias", Tensor<T>(num::Shape{1, cfg.ff_dim}));
    p2_w_ = store_.add("projector.l2.weight", num::uniform_matrix<T>(cfg.ff_dim, cfg.lm_dim, cfg.ff_dim, rng));
    p2_b_ = store_.add("projector.l2.bias", Tensor<T>(num::Shape{1, cfg.lm_dim}));
  }

  const AdapterConfig& config() const noexcept { return cfg_; }
  num::ParameterStore<T>& params() noexcept { return store_; }
  const num::ParameterStore<T>& params() const noexcept { return store_; }
  std::size_t parameter_count() const { return store_.scalar_count(); }
  num::Parameter<T>& label_table() { return store_[labels_]; }

  std::size_t entity_label_id(kg::EntityId e) const { return e; }
  std::size_t relation_label_id(kg::RelationId r) const { return cfg_.entities + r; }

  Var<T> embed_label(Tape<T>& tape, std::size_t id) {
    if (id >= cfg_.entities + cfg_.relations) {
      throw std::out_of_range("label id " + std::to_string(id) + " outside the adapter vocabulary");
    }
    const std::size_t ids[] = {id};
    return num::gather_rows(p(tape, labels_), std::span<const std::size_t>(ids));
  }

  // h + r + t is summed as (h + t) + r so that swapping h and t is bit-exact.
  static Var<T> struct_embed(StructMode mode, const Var<T>& h, const Var<T>& r, const Var<T>& t) {
    return mode == StructMode::HplusRminusT ? num::sub(num::add(h, r), t) : num::add(num::add(h, t), r);
  }
  Var<T> struct_embed(const Var<T>& h, const Var<T>& r, const Var<T>& t) const {
    return struct_embed(cfg_.mode, h, r, t);
  }

  // Zero-pads s_1..s_m to H slots, concatenates, applies the affine aggregator.
  Var<T> aggregate_struct(Tape<T>& tape, std::span<const Var<T>> s) {
    if (s.empty() || s.size() > cfg_.max_hops) {
      throw std::invalid_argument("aggregate_struct: " + std::to_string(s.size()) + " triples for " +
                                  std::to_string(cfg_.max_hops) + " slots");
    }
    std::vector<Var<T>> slots(s.begin(), s.end());
    if (slots.size() < cfg_.max_hops) {
      slots.push_back(tape.constant(Tensor<T>(num::Shape{1, (cfg_.max_hops - s.size()) * cfg_.dim})));
    }
    Var<T> flat = slots.size() == 1 ? slots.front() : num::concat<T>(slots, 1);
    return num::linear(flat, p(tape, struct_w_), p(tape, struct_b_));
  }

  static Var<T> fuse_text(std::span<const Var<T>> v) {
    if (v.empty()) throw std::invalid_argument("fuse_text: empty list");
    if (v.size() == 1) return v.front();
    return num::mean(num::concat<T>(v, 0), 0);
  }

  static Var<T> consolidate(const Var<T>& zh, const Var<T>& zr, const Var<T>& zt) {
    if (zh.shape() != zr.shape() || zr.shape() != zt.shape()) {
      throw num::ShapeError("consolidate: " + num::shape_string(zh.shape()) + ", " + num::shape_string(zr.shape()) +
                            ", " + num::shape_string(zt.shape()));
    }
    const Var<T> parts[] = {zh, zr, zt};
    return num::concat<T>(parts, 1);
  }

  // [readout; W zt + b; zs] through one pre-norm block; the readout row.
  // Without structure the zs row is left out.
  Var<T> encode_knowledge(Tape<T>& tape, const Var<T>& zt, const Var<T>* zs) {
    const std::size_t d = cfg_.dim;
    if (zt.rows() != 1 || zt.cols() != 3 * d) {
      throw num::ShapeError("encode_knowledge: text vector " + num::shape_string(zt.shape()) + ", expected (1, " +
                            std::to_string(3 * d) + ")");
    }
    if (zs != nullptr && (zs->rows() != 1 || zs->cols() != d)) {
      throw num::ShapeError("encode_knowledge: struct vector " + num::shape_string(zs->shape()) + ", expected (1, " +
                            std::to_string(d) + ")");
    }
    std::vector<Var<T>> rows{p(tape, readout_), num::linear(zt, p(tape, in_w_), p(tape, in_b_))};
    if (zs != nullptr) rows.push_back(*zs);
    Var<T> seq = num::concat<T>(rows, 0);
    Var<T> out = num::transformer_block(tape, store_, block_, seq, cfg_.heads, false);
    return num::slice_rows(out, 0, 1);
  }

  Var<T> encode_path(Tape<T>& tape, const kg::ReasoningPath& path) {
    const auto triples = path.triples();
    if (triples.empty()) throw std::invalid_argument("encode_path: path has no steps");
    if (triples.size() > cfg_.max_hops) {
      throw std::invalid_argument("encode_path: path of " + std::to_string(triples.size()) + " hops exceeds " +
                                  std::to_string(cfg_.max_hops));
    }
    std::vector<Var<T>> heads, rels, tails, structs;
    for (const auto& t : triples) {
      heads.push_back(embed_label(tape, entity_label_id(t.head)));
      rels.push_back(embed_label(tape, relation_label_id(t.relation)));
      tails.push_back(embed_label(tape, entity_label_id(t.tail)));
      if (cfg_.use_struct) structs.push_back(struct_embed(heads.back(), rels.back(), tails.back()));
    }
    Var<T> zt = consolidate(fuse_text(heads), fuse_text(rels), fuse_text(tails));
    if (!cfg_.use_struct) return encode_knowledge(tape, zt, nullptr);
    Var<T> zs = aggregate_struct(tape, structs);
    return encode_knowledge(tape, zt, &zs);
  }

  // Φ applied to each row independently: (N, d) -> (N, d_lm).
  Var<T> project(Tape<T>& tape, const Var<T>& z) {
    if (z.cols() != cfg_.dim) {
      throw num::ShapeError("project_soft_prompt: input width " + std::to_string(z.cols()) + " != " +
                            std::to_string(cfg_.dim));
    }
    Var<T> h = num::gelu(num::linear(z, p(tape, p1_w_), p(tape, p1_b_)));
    return num::linear(h, p(tape, p2_w_), p(tape, p2_b_));
  }

  Var<T> project_soft_prompt(Tape<T>& tape, std::span<const Var<T>> path_vectors) {
    if (path_vectors.empty()) throw std::invalid_argument("project_soft_prompt: no path vectors");
    return project(tape, path_vectors.size() == 1 ? path_vectors.front() : num::concat<T>(path_vectors, 0));
  }

  // One soft token per path, in path order: (N, d_lm).
  Var<T> soft_prompt(Tape<T>& tape, std::span<const kg::ReasoningPath> paths) {
    std::vector<Var<T>> z;
    z.reserve(paths.size());
    for (const auto& path : paths) z.push_back(encode_path(tape, path));
    return project_soft_prompt(tape, z);
  }

  num::Archive to_archive(const kg::KnowledgeGraph& graph) const
    requires std::same_as<T, float>
  {
    num::Archive ar;
    ar.set_meta("kind", "adapter");
    ar.set_meta("entities", std::to_string(cfg_.entities));
    ar.set_meta("relations", std::to_string(cfg_.relations));
    ar.set_meta("dim", std::to_string(cfg_.dim));
    ar.set_meta("ff_dim", std::to_string(cfg_.ff_dim));
    ar.set_meta("lm_dim", std::to_string(cfg_.lm_dim));
    ar.set_meta("heads", std::to_string(cfg_.heads));
    ar.set_meta("max_hops", std::to_string(cfg_.max_hops));
    ar.set_meta("mode", to_string(cfg_.mode));
    ar.set_meta("use_struct", cfg_.use_struct ? "1" : "0");
    ar.set_meta("vocab_hash", std::to_string(vocabulary_hash(graph)));
    ar.add(store_);
    return ar;
  }

  static KnowledgeAdapter from_archive(const num::Archive& ar, const kg::KnowledgeGraph& graph)
    requires std::same_as<T, float>
  {
    if (ar.require_meta("kind") != "adapter") throw num::ArchiveError("archive is not an adapter checkpoint");
    if (ar.require_meta("vocab_hash") != std::to_string(vocabulary_hash(graph))) {
      throw num::ArchiveError("adapter checkpoint was trained on a different graph vocabulary");
    }
    AdapterConfig cfg;
    cfg.entities = std::stoul(ar.require_meta("entities"));
    cfg.relations = std::stoul(ar.require_meta("relations"));
    cfg.dim = std::stoul(ar.require_meta("dim"));
    cfg.ff_dim = std::stoul(ar.require_meta("ff_dim"));
    cfg.lm_dim = std::stoul(ar.require_meta("lm_dim"));
    cfg.heads = std::stoul(ar.require_meta("heads"));
    cfg.max_hops = std::stoul(ar.require_meta("max_hops"));
    cfg.mode = struct_mode_from_string(ar.require_meta("mode"));
    cfg.use_struct = ar.require_meta("use_struct") == "1";
    KnowledgeAdapter a(cfg, 0);
    ar.restore(a.store_);
    return a;
  }

  template <std::floating_point U>
  KnowledgeAdapter<U> cast() const {
    KnowledgeAdapter<U> other(cfg_, 0);
    auto src = store_.begin();
    for (auto& q : other.params()) {
      q.value = src->value.template cast<U>();
      q.set_trainable(src->trainable);
      ++src;
    }
    return other;
  }

 private:
  Var<T> p(Tape<T>& tape, num::ParamId id) { return tape.parameter(store_[id]); }

  AdapterConfig cfg_;
  num::ParameterStore<T> store_;
  num::ParamId labels_ = 0, struct_w_ = 0, struct_b_ = 0, readout_ = 0, in_w_ = 0, in_b_ = 0;
  num::ParamId p1_w_ = 0, p1_b_ = 0, p2_w_ = 0, p2_b_ = 0;
  num::BlockParams block_{};
};

}  // namespace kgprompt::adapter
