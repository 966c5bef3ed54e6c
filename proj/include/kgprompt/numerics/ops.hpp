#pragma once
// Differentiable primitives. Each records its forward value on the tape of
// its inputs together with the adjoint that accumulates input gradients.
//
// Shape conventions: matrices are (rows, cols); a rank-1 input of length n is
// read as a (1, n) row. Results are rank 2 except scalar reductions, which
// have shape (1,). Mismatched shapes throw ShapeError naming the operation.

#include <cstddef>
#include <span>
#include <vector>

#include "kgprompt/numerics/tape.hpp"

namespace kgprompt::num {

enum class Reduction { Mean, Sum };

// a (m,k) x b (k,n) -> (m,n)
template <std::floating_point T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

// a (m,k) x b(n,k)^T -> (m,n)
template <std::floating_point T>
Var<T> matmul_transposed(const Var<T>& a, const Var<T>& b);

// Elementwise sum. `b` may also be a single row broadcast over the rows of `a`.
template <std::floating_point T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <std::floating_point T>
Var<T> sub(const Var<T>& a, const Var<T>& b);

template <std::floating_point T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <std::floating_point T>
Var<T> scale(const Var<T>& a, double factor);

template <std::floating_point T>
Var<T> tanh(const Var<T>& a);

template <std::floating_point T>
Var<T> relu(const Var<T>& a);

template <std::floating_point T>
Var<T> gelu(const Var<T>& a);

template <std::floating_point T>
Var<T> transpose(const Var<T>& a);

// axis 0 stacks rows, axis 1 places blocks side by side.
template <std::floating_point T>
Var<T> concat(std::span<const Var<T>> parts, int axis);

template <std::floating_point T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t count);

template <std::floating_point T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t count);

// axis 0 averages rows into (1, cols); axis 1 averages columns into (rows, 1).
template <std::floating_point T>
Var<T> mean(const Var<T>& a, int axis);

template <std::floating_point T>
Var<T> sum(const Var<T>& a);

// Row-wise softmax.
template <std::floating_point T>
Var<T> softmax(const Var<T>& a);

// Row-wise softmax over a square score matrix where entry (i, j) with j > i
// is masked out and receives probability exactly zero.
template <std::floating_point T>
Var<T> causal_softmax(const Var<T>& a);

// Row-wise normalization to zero mean / unit variance followed by the
// elementwise affine map gain * x + bias.
template <std::floating_point T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps = 1e-5);

// Rows `ids` of `table`, in order.
template <std::floating_point T>
Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> ids);

// Cross entropy between row-wise softmax(logits) and integer targets.
template <std::floating_point T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::size_t> targets,
                     Reduction reduction = Reduction::Mean);

// Non-differentiable helpers over plain tensors.
template <std::floating_point T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

template <std::floating_point T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits);

}  // namespace kgprompt::num
