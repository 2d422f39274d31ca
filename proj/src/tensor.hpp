// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ernetcl {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {

// One vertex of the computation graph. Leaves have no inputs and no
// backward rule; every other node is produced by exactly one kernel.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad, accumulates into the inputs' grads.
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Dense row-major array of doubles with an optional reverse-mode history.
///
/// Tensors are cheap handles: copying one shares the underlying storage.
/// Values are immutable once a kernel has produced them; only leaves expose
/// mutable storage (for optimizers and finite-difference probes).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool is_leaf() const;

  /// Writable storage; only valid on leaves.
  std::span<double> mutable_values();

  /// Gradient after backward(); empty span if none was populated.
  std::span<const double> grad() const;
  void zero_grad();

  /// Fresh leaf with copied values and the same requires_grad flag.
  Tensor clone() const;
  /// Leaf sharing no history with this tensor.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Allocation

enum class InitKind { kZeros, kUniform, kScaledUniform };

struct Init {
  InitKind kind = InitKind::kZeros;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t fan_in = 1;

  static Init zeros() { return {}; }
  static Init uniform(double lo, double hi) { return {InitKind::kUniform, lo, hi, 1}; }
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  static Init scaled_uniform(std::size_t fan_in) {
    return {InitKind::kScaledUniform, 0.0, 0.0, fan_in};
  }
};

Tensor alloc(const Shape& shape, const Init& init, Rng& rng,
             bool requires_grad = true);

// ---------------------------------------------------------------------------
// Kernels. Each registers its backward rule when any input requires grad.
//
// Broadcasting in add/sub/mul is limited to leading axes: the second
// operand's shape must be a suffix of the first operand's shape.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end, std::size_t axis);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
// Along the last axis, with max subtraction.
Tensor softmax_last(const Tensor& a);
// Per-vector standardization along the last axis followed by gain/bias.
Tensor layer_norm_last(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps);

/// -(1/normalizer) * sum_i weight[i] * log(max(probs[i, label[i]], floor)).
/// Rows whose label is negative are skipped.
Tensor weighted_nll(const Tensor& probs, std::span<const int> labels,
                    std::span<const double> row_weights, double normalizer,
                    double floor = 1e-12);

double sigmoid(double x);

// ---------------------------------------------------------------------------
// Reverse pass

/// Topologically ordered record of the nodes reachable from a root.
class Graph {
 public:
  static Graph trace(const Tensor& root);

  const std::vector<detail::Node*>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<detail::Node*> order_;
  std::vector<std::shared_ptr<detail::Node>> keep_alive_;
};

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires grad.
void backward(const Tensor& root);
/// Same, but first zeroes the grads of `leaves`, so leaves off the path to
/// root end up with an all-zero gradient.
void backward(const Tensor& root, std::span<Tensor> leaves);

/// Max over all entries of |analytic - central difference| / max(1, |fd|).
/// `f` is called repeatedly; it must rebuild its graph from the current leaf
/// values and be bitwise deterministic.
double finite_diff_check(const std::function<Tensor()>& f,
                         std::span<Tensor> params, double h = 1e-5);

}  // namespace ernetcl
