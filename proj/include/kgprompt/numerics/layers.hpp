#pragma once
// Small building blocks shared by the adapter and the language model.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kgprompt/numerics/ops.hpp"

namespace kgprompt::num {

// Fills `t` with Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
template <std::floating_point T>
void init_uniform(Tensor<T>& t, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

template <std::floating_point T>
Tensor<T> uniform_matrix(std::size_t rows, std::size_t cols, std::size_t fan_in,
                         std::mt19937_64& rng) {
  Tensor<T> t(Shape{rows, cols});
  init_uniform(t, fan_in, rng);
  return t;
}

// Parameter ids of one pre-norm transformer block.
struct BlockParams {
  ParamId ln1_gain, ln1_bias;
  ParamId wq, wk, wv, wo;
  ParamId ln2_gain, ln2_bias;
  ParamId ff1_w, ff1_b, ff2_w, ff2_b;
};

template <std::floating_point T>
BlockParams add_block_params(ParameterStore<T>& store, const std::string& prefix, std::size_t dim,
                             std::size_t ff_dim, std::mt19937_64& rng) {
  BlockParams b{};
  b.ln1_gain = store.add(prefix + "ln1.gain", Tensor<T>(Shape{1, dim}, T{1}));
  b.ln1_bias = store.add(prefix + "ln1.bias", Tensor<T>(Shape{1, dim}));
  b.wq = store.add(prefix + "attn.wq", uniform_matrix<T>(dim, dim, dim, rng));
  b.wk = store.add(prefix + "attn.wk", uniform_matrix<T>(dim, dim, dim, rng));
  b.wv = store.add(prefix + "attn.wv", uniform_matrix<T>(dim, dim, dim, rng));
  b.wo = store.add(prefix + "attn.wo", uniform_matrix<T>(dim, dim, dim, rng));
  b.ln2_gain = store.add(prefix + "ln2.gain", Tensor<T>(Shape{1, dim}, T{1}));
  b.ln2_bias = store.add(prefix + "ln2.bias", Tensor<T>(Shape{1, dim}));
  b.ff1_w = store.add(prefix + "ff1.weight", uniform_matrix<T>(dim, ff_dim, dim, rng));
  b.ff1_b = store.add(prefix + "ff1.bias", Tensor<T>(Shape{1, ff_dim}));
  b.ff2_w = store.add(prefix + "ff2.weight", uniform_matrix<T>(ff_dim, dim, ff_dim, rng));
  b.ff2_b = store.add(prefix + "ff2.bias", Tensor<T>(Shape{1, dim}));
  return b;
}

// x * W + b
template <std::floating_point T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  return add(matmul(x, weight), bias);
}

// Multi-head scaled dot-product self-attention over the rows of `x`.
template <std::floating_point T>
Var<T> self_attention(const Var<T>& x, const Var<T>& wq, const Var<T>& wk, const Var<T>& wv,
                      const Var<T>& wo, std::size_t heads, bool causal) {
  const std::size_t dim = x.cols();
  if (heads == 0 || dim % heads != 0) {
    throw ShapeError("self_attention: width " + std::to_string(dim) + " not divisible into " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var<T> q = matmul(x, wq);
  Var<T> k = matmul(x, wk);
  Var<T> v = matmul(x, wv);
  std::vector<Var<T>> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var<T> qh = heads == 1 ? q : slice_cols(q, h * head_dim, head_dim);
    Var<T> kh = heads == 1 ? k : slice_cols(k, h * head_dim, head_dim);
    Var<T> vh = heads == 1 ? v : slice_cols(v, h * head_dim, head_dim);
    Var<T> scores = scale(matmul_transposed(qh, kh), inv_sqrt);
    Var<T> probs = causal ? causal_softmax(scores) : softmax(scores);
    outputs.push_back(matmul(probs, vh));
  }
  Var<T> merged = heads == 1 ? outputs.front() : concat<T>(outputs, 1);
  return matmul(merged, wo);
}

// x + Attn(LN1(x)); then + FF(LN2(.)) with a GELU hidden layer.
template <std::floating_point T, class Store>
Var<T> transformer_block(Tape<T>& tape, Store& store, const BlockParams& b, const Var<T>& x,
                         std::size_t heads, bool causal) {
  auto p = [&](ParamId id) { return tape.parameter(store[id]); };
  Var<T> h = layer_norm(x, p(b.ln1_gain), p(b.ln1_bias));
  Var<T> x1 = add(x, self_attention(h, p(b.wq), p(b.wk), p(b.wv), p(b.wo), heads, causal));
  Var<T> h2 = layer_norm(x1, p(b.ln2_gain), p(b.ln2_bias));
  Var<T> ff = linear(gelu(linear(h2, p(b.ff1_w), p(b.ff1_b))), p(b.ff2_w), p(b.ff2_b));
  return add(x1, ff);
}

}  // namespace kgprompt::num
