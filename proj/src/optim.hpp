// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace ernetcl {

/// Adam with decoupled weight decay:
///   theta -= lr * lambda * theta
///   theta -= lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 3e-4;
  };

  explicit AdamW(Options options) : options_(options) {}

  /// Updates every parameter from its current grad(). Moment buffers are
  /// created on the first call and must keep their shapes afterwards.
  void step(std::span<Tensor> params);

  std::size_t step_count() const noexcept { return step_; }
  const Options& options() const noexcept { return options_; }
  std::span<const std::vector<double>> first_moments() const { return m_; }
  std::span<const std::vector<double>> second_moments() const { return v_; }

 private:
  Options options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

/// Rescales all grads so their joint L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace ernetcl
