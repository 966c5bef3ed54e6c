#pragma once
// Central finite-difference oracle for reverse-mode gradients.
//
// The oracle only ever evaluates forward values; it never reads an adjoint.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kgprompt/numerics/tape.hpp"

namespace kgprompt::num {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries = 0;
  std::string worst;  // location of the largest error

  void merge(const GradCheckResult& other) {
    entries += other.entries;
    if (other.max_relative_error > max_relative_error) {
      max_relative_error = other.max_relative_error;
      worst = other.worst;
    }
  }
};

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
// to truncation error from dominating the report.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Five-point central difference (O(step^4) truncation) at x0.
template <class F>
double central_difference(F&& f, double x0, double step) {
  const double p1 = f(x0 + step), m1 = f(x0 - step);
  const double p2 = f(x0 + 2 * step), m2 = f(x0 - 2 * step);
  return (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * step);
}

template <std::floating_point T>
using InputLoss = std::function<Var<T>(Tape<T>&, std::span<const Var<T>>)>;

template <std::floating_point T>
using ParameterLoss = std::function<Var<T>(Tape<T>&)>;

template <std::floating_point T>
GradCheckResult check_input_gradients(const InputLoss<T>& loss_fn, std::vector<Tensor<T>> inputs,
                                      double step = 1e-4, const std::string& label = "input") {
  std::vector<Tensor<T>> analytic;
  {
    Tape<T> tape;
    std::vector<Var<T>> vars;
    for (const auto& x : inputs) vars.push_back(tape.input(x));
    Var<T> loss = loss_fn(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto evaluate = [&]() {
    Tape<T> tape;
    std::vector<Var<T>> vars;
    for (const auto& x : inputs) vars.push_back(tape.constant(x));
    return static_cast<double>(loss_fn(tape, vars).value().item());
  };
  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const T original = inputs[i][j];
      const double numeric = central_difference([&](double x) {
        inputs[i][j] = static_cast<T>(x);
        return evaluate();
      }, original, step);
      inputs[i][j] = original;
      const double err = relative_error(analytic[i][j], numeric);
      ++result.entries;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = label + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      }
    }
  }
  return result;
}

// Checks d(loss)/d(parameter) for trainable parameters in `store`. At most
// `max_entries` randomly chosen entries are probed per parameter.
template <std::floating_point T>
GradCheckResult check_parameter_gradients(ParameterStore<T>& store, const ParameterLoss<T>& loss_fn,
                                          double step = 1e-4, std::size_t max_entries = 16,
                                          std::uint64_t seed = 0) {
  store.zero_grad();
  {
    Tape<T> tape;
    Var<T> loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto evaluate = [&]() {
    Tape<T> tape;
    return static_cast<double>(loss_fn(tape).value().item());
  };
  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (auto& p : store) {
    if (!p.trainable) continue;
    const Tensor<T> analytic = p.grad;
    std::vector<std::size_t> idx(p.value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_entries);
    }
    for (std::size_t j : idx) {
      const T original = p.value[j];
      const double numeric = central_difference([&](double x) {
        p.value[j] = static_cast<T>(x);
        return evaluate();
      }, original, step);
      p.value[j] = original;
      const double err = relative_error(analytic[j], numeric);
      ++result.entries;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = p.name + "[" + std::to_string(j) + "]";
      }
    }
  }
  store.zero_grad();
  return result;
}

}  // namespace kgprompt::num
