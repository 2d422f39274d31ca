// SPDX-License-Identifier: Apache-2.0
#include "optim.hpp"

#include <cmath>

#include "error.hpp"

namespace ernetcl {

void AdamW::step(std::span<Tensor> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  if (params.size() != m_.size()) {
    fail(ErrorCode::kShape, "AdamW: optimizer tracks " + std::to_string(m_.size()) + " tensors, got " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != m_[i].size() ||
        (!params[i].grad().empty() && params[i].grad().size() != params[i].size())) {
      fail(ErrorCode::kShape, "AdamW: parameter " + std::to_string(i) + " changed shape to " +
                                  to_string(params[i].shape()));
    }
  }

  ++step_;
  const auto& o = options_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].mutable_values();
    const auto grad = params[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      theta[j] -= o.learning_rate * o.weight_decay * theta[j];
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      // Grad buffers live on the leaf node.
      for (double& g : p.node()->grad) g *= s;
    }
  }
  return norm;
}

}  // namespace ernetcl
