#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "kgprompt/numerics/tensor.hpp"

namespace kgprompt::num {

// 0.5 * lr0 * (1 + cos(pi * step / total)), floored at 0.
inline double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
  if (step > total_steps) {
    throw std::invalid_argument("cosine_lr: step " + std::to_string(step) + " exceeds total " +
                                std::to_string(total_steps));
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  const double lr = 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * progress));
  return lr > 0.0 ? lr : 0.0;
}

template <std::floating_point T>
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Applies one update from the accumulated gradients, then zeroes them.
  virtual void step(double lr) = 0;
};

namespace detail {
template <std::floating_point T>
void require_grad(const Parameter<T>& p) {
  if (p.grad.shape() != p.value.shape()) {
    throw std::logic_error("optimizer: parameter '" + p.name + "' has no gradient buffer");
  }
}
}  // namespace detail

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <std::floating_point T>
class Adam final : public Optimizer<T> {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      first_.emplace_back(p->value.shape());
      second_.emplace_back(p->value.shape());
    }
  }

  void step(double lr) override {
    for (auto* p : params_) detail::require_grad(*p);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter<T>& p = *params_[k];
      auto w = p.value.values();
      auto g = p.grad.values();
      auto m = first_[k].values();
      auto v = second_[k].values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
        w[i] = static_cast<T>(w[i] - update);
      }
      p.zero_grad();
    }
  }

  std::size_t steps_taken() const noexcept { return t_; }
  const Tensor<T>& first_moment(std::size_t k) const { return first_.at(k); }
  const Tensor<T>& second_moment(std::size_t k) const { return second_.at(k); }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
  std::size_t t_ = 0;
};

template <std::floating_point T>
class Sgd final : public Optimizer<T> {
 public:
  explicit Sgd(std::vector<Parameter<T>*> params) : params_(std::move(params)) {}

  void step(double lr) override {
    for (auto* p : params_) detail::require_grad(*p);
    for (auto* p : params_) {
      auto w = p->value.values();
      auto g = p->grad.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(w[i] - lr * g[i]);
      p->zero_grad();
    }
  }

 private:
  std::vector<Parameter<T>*> params_;
};

}  // namespace kgprompt::num
