#include "kgprompt/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kgprompt::num {
namespace {

// C(m,n) += A(m,k) * B(k,n)
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T{0}) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m,n) += A(k,m)^T * B(k,n)
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T{0}) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m,n) += A(m,k) * B(n,k)^T. B is transposed once so the inner loop
// streams contiguously.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, n, k, a, bt.data(), c);
}

template <class T>
std::string dims(const Tensor<T>& t) {
  return shape_string(t.shape());
}

template <class T>
void require_same(std::string_view op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

template <class T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

template <std::floating_point T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + dims(av) + " x " + dims(bv));
  }
  Tensor<T> out(Shape{m, n});
  gemm_nn(m, n, k, av.data(), bv.data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b},
                         [ia, ib, m, n, k](Tape<T>& tape, std::size_t self) {
                           const Tensor<T>& g = tape.grad_of(self);
                           if (tape.requires_grad(ia)) {
                             gemm_nt(m, k, n, g.data(), tape.value(ib).data(),
                                     tape.grad_of(ia).data());
                           }
                           if (tape.requires_grad(ib)) {
                             gemm_tn(k, n, m, tape.value(ia).data(), g.data(),
                                     tape.grad_of(ib).data());
                           }
                         });
}

template <std::floating_point T>
Var<T> matmul_transposed(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  if (bv.cols() != k) {
    throw ShapeError("matmul_transposed: inner dimensions differ " + dims(av) + " x " +
                     dims(bv) + "^T");
  }
  Tensor<T> out(Shape{m, n});
  gemm_nt(m, n, k, av.data(), bv.data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul_transposed", std::move(out), {a, b},
                         [ia, ib, m, n, k](Tape<T>& tape, std::size_t self) {
                           const Tensor<T>& g = tape.grad_of(self);
                           if (tape.requires_grad(ia)) {
                             gemm_nn(m, k, n, g.data(), tape.value(ib).data(),
                                     tape.grad_of(ia).data());
                           }
                           if (tape.requires_grad(ib)) {
                             gemm_tn(n, k, m, g.data(), tape.value(ia).data(),
                                     tape.grad_of(ib).data());
                           }
                         });
}

template <std::floating_point T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t ia = a.id(), ib = b.id();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    Tensor<T> out = av;
    accumulate(out, bv);
    return a.tape().record("add", std::move(out), {a, b}, [ia, ib](Tape<T>& tape, std::size_t self) {
      const Tensor<T>& g = tape.grad_of(self);
      if (tape.requires_grad(ia)) accumulate(tape.grad_of(ia), g);
      if (tape.requires_grad(ib)) accumulate(tape.grad_of(ib), g);
    });
  }
  if (bv.rows() == 1 && bv.cols() == av.cols()) {
    const std::size_t rows = av.rows(), cols = av.cols();
    Tensor<T> out = av;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
    }
    return a.tape().record("add", std::move(out), {a, b},
                           [ia, ib, rows, cols](Tape<T>& tape, std::size_t self) {
                             const Tensor<T>& g = tape.grad_of(self);
                             if (tape.requires_grad(ia)) accumulate(tape.grad_of(ia), g);
                             if (tape.requires_grad(ib)) {
                               Tensor<T>& gb = tape.grad_of(ib);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
                               }
                             }
                           });
  }
  throw ShapeError("add: shape mismatch " + dims(av) + " vs " + dims(bv));
}

template <std::floating_point T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_same("sub", av, bv);
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {a, b}, [ia, ib](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_of(self);
    if (tape.requires_grad(ia)) accumulate(tape.grad_of(ia), g);
    if (tape.requires_grad(ib)) {
      Tensor<T>& gb = tape.grad_of(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <std::floating_point T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_same("mul", av, bv);
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_of(self);
    if (tape.requires_grad(ia)) {
      Tensor<T>& ga = tape.grad_of(ia);
      const Tensor<T>& bv = tape.value(ib);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.requires_grad(ib)) {
      Tensor<T>& gb = tape.grad_of(ib);
      const Tensor<T>& av = tape.value(ia);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <std::floating_point T>
Var<T> scale(const Var<T>& a, double factor) {
  const T f = static_cast<T>(factor);
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= f;
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(out), {a}, [ia, f](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_of(self);
    Tensor<T>& ga = tape.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += f * g[i];
  });
}

template <std::floating_point T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  const std::size_t ia = a.id();
  return a.tape().record("tanh", std::move(out), {a}, [ia](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_of(self);
    const Tensor<T>& y = tape.value(self);
    Tensor<T>& ga = tape.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (T{1} - y[i] * y[i]);
  });
}

template <std::floating_point T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = v > T{0} ? v : T{0};
  const std::size_t ia = a.id();
  return a.tape().record("relu", std::move(out), {a}, [ia](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_of(self);
    const Tensor<T>& x = tape.value(ia);
    Tensor<T>& ga = tape.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (x[i] > T{0}) ga[i] += g[i];
    }
  });
}

template <std::floating_point T>
Var<T> gelu(const Var<T>& a) {
  // tanh approximation
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  Tensor<T> out = a.value();
  for (auto& v : out.values()) {
    const double x = v;
    v = static_cast<T>(0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))));
  }
  const std::size_t ia = a.id();
  return a.tape().record("gelu", std::move(out), {a}, [ia](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_of(self);
    const Tensor<T>& xs = tape.value(ia);
    Tensor<T>& ga = tape.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double x = xs[i];
      const double t = std::tanh(k * (x + c * x * x * x));
      const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
      ga[i] += static_cast<T>(g[i] * d);
    }
  });
}

template <std::floating_point T>
Var<T> transpose(const Var<T>& a) {
  const auto& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor<T> out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  }
  const std::size_t ia = a.id();
  return a.tape().record("transpose", std::move(out), {a}, [ia, r, c](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_of(self);
    Tensor<T>& ga = tape.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g.at(j, i);
    }
  });
}

template <std::floating_point T>
Var<T> concat(std::span<const Var<T>> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  const std::size_t rows0 = parts[0].value().rows(), cols0 = parts[0].value().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    if (axis == 0 && v.cols() != cols0) {
      throw ShapeError("concat(axis=0): column mismatch " + dims(parts[0].value()) + " vs " + dims(v));
    }
    if (axis == 1 && v.rows() != rows0) {
      throw ShapeError("concat(axis=1): row mismatch " + dims(parts[0].value()) + " vs " + dims(v));
    }
    ids.push_back(p.id());
    extents.push_back(axis == 0 ? v.rows() : v.cols());
    total += extents.back();
  }
  const std::size_t out_rows = axis == 0 ? total : rows0;
  const std::size_t out_cols = axis == 0 ? cols0 : total;
  Tensor<T> out(Shape{out_rows, out_cols});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    for (std::size_t r = 0; r < v.rows(); ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == 0) out.at(offset + r, c) = v.at(r, c);
        else out.at(r, offset + c) = v.at(r, c);
      }
    }
    offset += extents[k];
  }
  return parts[0].tape().record(
      "concat", std::move(out), parts,
      [ids, extents, axis, out_cols](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_of(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (tape.requires_grad(ids[k])) {
            Tensor<T>& gk = tape.grad_of(ids[k]);
            const std::size_t r_n = gk.rows(), c_n = gk.cols();
            for (std::size_t r = 0; r < r_n; ++r) {
              for (std::size_t c = 0; c < c_n; ++c) {
                gk[r * c_n + c] += axis == 0 ? g[(off + r) * out_cols + c] : g[r * out_cols + off + c];
              }
            }
          }
          off += extents[k];
        }
      });
}

template <std::floating_point T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t count) {
  const auto& av = a.value();
  if (count == 0 || begin + count > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + dims(av));
  }
  const std::size_t cols = av.cols();
  std::vector<T> vals(av.data() + begin * cols, av.data() + (begin + count) * cols);
  const std::size_t ia = a.id();
  return a.tape().record("slice_rows", Tensor<T>(Shape{count, cols}, std::move(vals)), {a},
                         [ia, begin, cols](Tape<T>& tape, std::size_t self) {
                           const Tensor<T>& g = tape.grad_of(self);
                           Tensor<T>& ga = tape.grad_of(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
                         });
}

template <std::floating_point T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t count) {
  const auto& av = a.value();
  if (count == 0 || begin + count > av.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + dims(av));
  }
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor<T> out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * cols + begin, count, out.data() + r * count);
  }
  const std::size_t ia = a.id();
  return a.tape().record("slice_cols", std::move(out), {a},
                         [ia, begin, count, rows, cols](Tape<T>& tape, std::size_t self) {
                           const Tensor<T>& g = tape.grad_of(self);
                           Tensor<T>& ga = tape.grad_of(ia);
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < count; ++c) {
                               ga[r * cols + begin + c] += g[r * count + c];
                             }
                           }
                         });
}

template <std::floating_point T>
Var<T> mean(const Var<T>& a, int axis) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  const std::size_t ia = a.id();
  if (axis == 0) {
    Tensor<T> out(Shape{1, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[c] += av.at(r, c);
    }
    for (auto& v : out.values()) v /= static_cast<T>(rows);
    return a.tape().record("mean", std::move(out), {a}, [ia, rows, cols](Tape<T>& tape, std::size_t self) {
      const Tensor<T>& g = tape.grad_of(self);
      Tensor<T>& ga = tape.grad_of(ia);
      const T inv = T{1} / static_cast<T>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[c] * inv;
      }
    });
  }
  if (axis == 1) {
    Tensor<T> out(Shape{rows, 1});
    for (std::size_t r = 0; r < rows; ++r) {
      T s{0};
      for (std::size_t c = 0; c < cols; ++c) s += av.at(r, c);
      out[r] = s / static_cast<T>(cols);
    }
    return a.tape().record("mean", std::move(out), {a}, [ia, rows, cols](Tape<T>& tape, std::size_t self) {
      const Tensor<T>& g = tape.grad_of(self);
      Tensor<T>& ga = tape.grad_of(ia);
      const T inv = T{1} / static_cast<T>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[r] * inv;
      }
    });
  }
  throw ShapeError("mean: axis must be 0 or 1");
}

template <std::floating_point T>
Var<T> sum(const Var<T>& a) {
  T s{0};
  for (T v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor<T>::scalar(s), {a}, [ia](Tape<T>& tape, std::size_t self) {
    const T g = tape.grad_of(self)[0];
    for (auto& v : tape.grad_of(ia).values()) v += g;
  });
}

template <std::floating_point T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  Tensor<T> out(Shape{logits.rows(), logits.cols()});
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T z{0};
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (auto& v : o) v /= z;
  }
  return out;
}

template <std::floating_point T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits) {
  Tensor<T> out(Shape{logits.rows(), logits.cols()});
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T z{0};
    for (T v : in) z += std::exp(v - mx);
    const T lse = mx + std::log(z);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = in[c] - lse;
  }
  return out;
}

namespace {

template <class T>
void softmax_backward(const Tensor<T>& y, const Tensor<T>& g, Tensor<T>& gx) {
  const std::size_t rows = y.rows(), cols = y.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    T dot{0};
    for (std::size_t c = 0; c < cols; ++c) dot += g.at(r, c) * y.at(r, c);
    for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y.at(r, c) * (g.at(r, c) - dot);
  }
}

}  // namespace

template <std::floating_point T>
Var<T> softmax(const Var<T>& a) {
  const std::size_t ia = a.id();
  return a.tape().record("softmax", softmax_rows(a.value()), {a}, [ia](Tape<T>& tape, std::size_t self) {
    softmax_backward(tape.value(self), tape.grad_of(self), tape.grad_of(ia));
  });
}

template <std::floating_point T>
Var<T> causal_softmax(const Var<T>& a) {
  const auto& av = a.value();
  const std::size_t n = av.rows();
  if (av.cols() != n) throw ShapeError("causal_softmax: expects a square matrix, got " + dims(av));
  Tensor<T> out(Shape{n, n});
  for (std::size_t r = 0; r < n; ++r) {
    T mx = av.at(r, 0);
    for (std::size_t c = 1; c <= r; ++c) mx = std::max(mx, av.at(r, c));
    T z{0};
    for (std::size_t c = 0; c <= r; ++c) {
      out.at(r, c) = std::exp(av.at(r, c) - mx);
      z += out.at(r, c);
    }
    for (std::size_t c = 0; c <= r; ++c) out.at(r, c) /= z;
  }
  const std::size_t ia = a.id();
  return a.tape().record("causal_softmax", std::move(out), {a}, [ia](Tape<T>& tape, std::size_t self) {
    // Masked entries have y == 0 and therefore receive no gradient.
    softmax_backward(tape.value(self), tape.grad_of(self), tape.grad_of(ia));
  });
}

template <std::floating_point T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps) {
  const auto& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (gain.value().size() != cols || bias.value().size() != cols) {
    throw ShapeError("layer_norm: gain/bias " + dims(gain.value()) + "/" + dims(bias.value()) +
                     " do not match row width " + std::to_string(cols));
  }
  Tensor<T> normalized(Shape{rows, cols});
  std::vector<T> inv_std(rows);
  Tensor<T> out(Shape{rows, cols});
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T mu{0};
    for (std::size_t c = 0; c < cols; ++c) mu += xv.at(r, c);
    mu /= static_cast<T>(cols);
    T var{0};
    for (std::size_t c = 0; c < cols; ++c) {
      const T d = xv.at(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<T>(cols);
    inv_std[r] = T{1} / std::sqrt(var + static_cast<T>(eps));
    for (std::size_t c = 0; c < cols; ++c) {
      normalized.at(r, c) = (xv.at(r, c) - mu) * inv_std[r];
      out.at(r, c) = gv[c] * normalized.at(r, c) + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      "layer_norm", std::move(out), {x, gain, bias},
      [ix, ig, ib, rows, cols, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_of(self);
        if (tape.requires_grad(ig)) {
          Tensor<T>& gg = tape.grad_of(ig);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) gg[c] += g.at(r, c) * normalized.at(r, c);
          }
        }
        if (tape.requires_grad(ib)) {
          Tensor<T>& gb = tape.grad_of(ib);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
          }
        }
        if (tape.requires_grad(ix)) {
          const Tensor<T>& gv = tape.value(ig);
          Tensor<T>& gx = tape.grad_of(ix);
          std::vector<T> dxhat(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_d{0}, mean_dx{0};
            for (std::size_t c = 0; c < cols; ++c) {
              dxhat[c] = g.at(r, c) * gv[c];
              mean_d += dxhat[c];
              mean_dx += dxhat[c] * normalized.at(r, c);
            }
            mean_d /= static_cast<T>(cols);
            mean_dx /= static_cast<T>(cols);
            for (std::size_t c = 0; c < cols; ++c) {
              gx[r * cols + c] +=
                  inv_std[r] * (dxhat[c] - mean_d - normalized.at(r, c) * mean_dx);
            }
          }
        }
      });
}

template <std::floating_point T>
Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> ids) {
  const auto& tv = table.value();
  const std::size_t cols = tv.cols();
  if (ids.empty()) throw ShapeError("gather_rows: empty id list");
  Tensor<T> out(Shape{ids.size(), cols});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(ids[i]) + " out of range for " + dims(tv));
    }
    std::copy_n(tv.data() + ids[i] * cols, cols, out.data() + i * cols);
  }
  const std::size_t it = table.id();
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return table.tape().record("gather_rows", std::move(out), {table},
                             [it, cols, rows = std::move(rows)](Tape<T>& tape, std::size_t self) {
                               const Tensor<T>& g = tape.grad_of(self);
                               Tensor<T>& gt = tape.grad_of(it);
                               for (std::size_t i = 0; i < rows.size(); ++i) {
                                 for (std::size_t c = 0; c < cols; ++c) {
                                   gt[rows[i] * cols + c] += g[i * cols + c];
                                 }
                               }
                             });
}

template <std::floating_point T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::size_t> targets, Reduction reduction) {
  const auto& lv = logits.value();
  const std::size_t rows = lv.rows(), cols = lv.cols();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " + dims(lv));
  }
  Tensor<T> probs = softmax_rows(lv);
  T loss{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) {
      throw ShapeError("cross_entropy: target " + std::to_string(targets[r]) + " out of range for " + dims(lv));
    }
    const auto row = lv.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T z{0};
    for (T v : row) z += std::exp(v - mx);
    loss += mx + std::log(z) - row[targets[r]];
  }
  const T norm = reduction == Reduction::Mean ? T{1} / static_cast<T>(rows) : T{1};
  loss *= norm;
  const std::size_t il = logits.id();
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return logits.tape().record(
      "cross_entropy", Tensor<T>::scalar(loss), {logits},
      [il, cols, norm, tgt = std::move(tgt), probs = std::move(probs)](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad_of(self)[0] * norm;
        Tensor<T>& gl = tape.grad_of(il);
        for (std::size_t r = 0; r < tgt.size(); ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            gl[r * cols + c] += g * (probs.at(r, c) - (c == tgt[r] ? T{1} : T{0}));
          }
        }
      });
}

#define KGPROMPT_INSTANTIATE_OPS(T)                                                         \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                     \
  template Var<T> matmul_transposed(const Var<T>&, const Var<T>&);                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                        \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                        \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> scale(const Var<T>&, double);                                             \
  template Var<T> tanh(const Var<T>&);                                                      \
  template Var<T> relu(const Var<T>&);                                                      \
  template Var<T> gelu(const Var<T>&);                                                      \
  template Var<T> transpose(const Var<T>&);                                                 \
  template Var<T> concat(std::span<const Var<T>>, int);                                     \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);                      \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                      \
  template Var<T> mean(const Var<T>&, int);                                                 \
  template Var<T> sum(const Var<T>&);                                                       \
  template Var<T> softmax(const Var<T>&);                                                   \
  template Var<T> causal_softmax(const Var<T>&);                                            \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);          \
  template Var<T> gather_rows(const Var<T>&, std::span<const std::size_t>);                 \
  template Var<T> cross_entropy(const Var<T>&, std::span<const std::size_t>, Reduction);    \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                        \
  template Tensor<T> log_softmax_rows(const Tensor<T>&);

KGPROMPT_INSTANTIATE_OPS(float)
KGPROMPT_INSTANTIATE_OPS(double)

#undef KGPROMPT_INSTANTIATE_OPS

}  // namespace kgprompt::num
