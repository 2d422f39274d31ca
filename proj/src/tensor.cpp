// SPDX-License-Identifier: Apache-2.0
#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "error.hpp"

namespace ernetcl {

using detail::Node;

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) fail(ErrorCode::kShape, "tensor shape must have rank >= 1");
  for (auto e : shape) {
    if (e == 0) fail(ErrorCode::kShape, "invalid shape " + to_string(shape) + ": zero extent");
  }
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_size(shape) != values.size()) {
    fail(ErrorCode::kShape, "shape " + to_string(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (auto* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Output node; history is attached only when some input needs gradients.
std::shared_ptr<Node> make_result(const char* op, Shape shape, std::vector<double> value,
                                  std::vector<std::shared_ptr<Node>> inputs,
                                  std::function<void(Node&)> backward, bool track) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  if (track) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return n;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) fail(ErrorCode::kInvalidArgument, std::string(op) + ": undefined tensor");
}

bool is_suffix(const Shape& full, const Shape& part) {
  if (part.size() > full.size()) return false;
  return std::equal(part.rbegin(), part.rend(), full.rbegin());
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorCode::kShape, std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

// Splits a shape around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

enum class Elementwise { kAdd, kSub, kMul };

Tensor broadcast_binary(const Tensor& a, const Tensor& b, Elementwise kind, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (!is_suffix(a.shape(), b.shape())) shape_mismatch(op, a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t nb = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av[i];
    const double y = bv[i % nb];
    switch (kind) {
      case Elementwise::kAdd: out[i] = x + y; break;
      case Elementwise::kSub: out[i] = x - y; break;
      case Elementwise::kMul: out[i] = x * y; break;
    }
  }
  auto an = a.node();
  auto bn = b.node();
  auto backward = [kind, nb](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    const auto& g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t j = i % nb;
      switch (kind) {
        case Elementwise::kAdd:
          if (x.requires_grad) x.grad[i] += g[i];
          if (y.requires_grad) y.grad[j] += g[i];
          break;
        case Elementwise::kSub:
          if (x.requires_grad) x.grad[i] += g[i];
          if (y.requires_grad) y.grad[j] -= g[i];
          break;
        case Elementwise::kMul:
          if (x.requires_grad) x.grad[i] += g[i] * y.value[j];
          if (y.requires_grad) y.grad[j] += g[i] * x.value[i];
          break;
      }
    }
  };
  return Tensor(make_result(op, a.shape(), std::move(out), {an, bn}, backward,
                            any_requires_grad({&a, &b})));
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Deriv deriv_from_output) {
  require_defined(a, op);
  const auto av = a.values();
  std::vector<double> out(av.size());
  std::transform(av.begin(), av.end(), out.begin(), fwd);
  auto backward = [deriv_from_output](Node& self) {
    Node& x = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      x.grad[i] += self.grad[i] * deriv_from_output(self.value[i]);
    }
  };
  return Tensor(make_result(op, a.shape(), std::move(out), {a.node()}, backward,
                            a.requires_grad()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  std::vector<double> v(shape_size(shape), value);
  return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    fail(ErrorCode::kRank, "axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const {
  require_defined(*this, "values");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorCode::kRank, "item() on non-scalar " + to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) fail(ErrorCode::kRank, "at(row, col) needs a matrix, got " + to_string(shape()));
  return node_->value.at(row * node_->shape[1] + col);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return node_ && !node_->backward; }

std::span<double> Tensor::mutable_values() {
  require_defined(*this, "mutable_values");
  if (!is_leaf()) fail(ErrorCode::kInvalidArgument, "only leaf tensors are writable");
  return node_->value;
}

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::clone() const {
  require_defined(*this, "clone");
  return from_values(node_->shape, node_->value, node_->requires_grad);
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return from_values(node_->shape, node_->value, false);
}

// ---------------------------------------------------------------------------
// Allocation

Tensor alloc(const Shape& shape, const Init& init, Rng& rng, bool requires_grad) {
  check_shape(shape);
  std::vector<double> v(shape_size(shape), 0.0);
  switch (init.kind) {
    case InitKind::kZeros:
      break;
    case InitKind::kUniform: {
      if (!(init.lo < init.hi)) fail(ErrorCode::kInvalidArgument, "uniform init needs lo < hi");
      std::uniform_real_distribution<double> dist(init.lo, init.hi);
      for (auto& x : v) x = dist(rng);
      break;
    }
    case InitKind::kScaledUniform: {
      if (init.fan_in == 0) fail(ErrorCode::kInvalidArgument, "fan_in must be positive");
      const double bound = 1.0 / std::sqrt(static_cast<double>(init.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& x : v) x = dist(rng);
      break;
    }
  }
  return Tensor::from_values(shape, std::move(v), requires_grad);
}

// ---------------------------------------------------------------------------
// Kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_mismatch("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  }
  auto backward = [m, k, n](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    const auto& g = self.grad;
    if (x.requires_grad) {
      // dA = dC * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y.value[p * n + j];
          x.grad[i * k + p] += acc;
        }
      }
    }
    if (y.requires_grad) {
      // dB = A^T * dC
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x.value[i * k + p];
          for (std::size_t j = 0; j < n; ++j) y.grad[p * n + j] += xv * g[i * n + j];
        }
      }
    }
  };
  return Tensor(make_result("matmul", {m, n}, std::move(out), {a.node(), b.node()}, backward,
                            any_requires_grad({&a, &b})));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, Elementwise::kAdd, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, Elementwise::kSub, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, Elementwise::kMul, "mul");
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return x * factor; },
      [factor](double) { return factor; });
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  return concat(std::vector<Tensor>{a, b}, axis);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::kInvalidArgument, "concat: no operands");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) fail(ErrorCode::kRank, "concat: axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  bool track = false;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) shape_mismatch("concat", first, s);
    out_shape[axis] += s[axis];
    track = track || p.requires_grad();
  }
  const auto split = split_at(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;  // along axis
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t ext = p.dim(axis);
    const auto pv = p.values();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(&pv[o * ext * split.inner], ext * split.inner,
                  &out[(o * split.extent + offset) * split.inner]);
    }
    offset += ext;
  }
  std::vector<std::shared_ptr<Node>> inputs;
  for (const auto& p : parts) inputs.push_back(p.node());
  auto backward = [split, offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      const std::size_t ext = in.value.size() / (split.outer * split.inner);
      for (std::size_t o = 0; o < split.outer; ++o) {
        const double* src = &self.grad[(o * split.extent + offsets[k]) * split.inner];
        double* dst = &in.grad[o * ext * split.inner];
        for (std::size_t i = 0; i < ext * split.inner; ++i) dst[i] += src[i];
      }
    }
  };
  return Tensor(make_result("concat", out_shape, std::move(out), std::move(inputs), backward, track));
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end, std::size_t axis) {
  require_defined(a, "slice");
  if (axis >= a.rank()) fail(ErrorCode::kRank, "slice: axis out of range for " + to_string(a.shape()));
  if (begin >= end || end > a.dim(axis)) {
    fail(ErrorCode::kShape, "slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") invalid for " + to_string(a.shape()));
  }
  const auto split = split_at(a.shape(), axis);
  const std::size_t ext = end - begin;
  Shape out_shape = a.shape();
  out_shape[axis] = ext;
  std::vector<double> out(shape_size(out_shape));
  const auto av = a.values();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(&av[(o * split.extent + begin) * split.inner], ext * split.inner,
                &out[o * ext * split.inner]);
  }
  auto backward = [split, begin, ext](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t o = 0; o < split.outer; ++o) {
      const double* src = &self.grad[o * ext * split.inner];
      double* dst = &in.grad[(o * split.extent + begin) * split.inner];
      for (std::size_t i = 0; i < ext * split.inner; ++i) dst[i] += src[i];
    }
  };
  return Tensor(make_result("slice", out_shape, std::move(out), {a.node()}, backward,
                            a.requires_grad()));
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  if (a.rank() != 2) fail(ErrorCode::kRank, "transpose needs a matrix, got " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  auto backward = [m, n](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) in.grad[i * n + j] += self.grad[j * m + i];
  };
  return Tensor(make_result("transpose", {n, m}, std::move(out), {a.node()}, backward,
                            a.requires_grad()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  check_shape(shape);
  if (shape_size(shape) != a.size()) shape_mismatch("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  auto backward = [](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  };
  return Tensor(make_result("reshape", std::move(shape), std::move(out), {a.node()}, backward,
                            a.requires_grad()));
}

namespace {

Tensor reduce_axis(const Tensor& a, std::size_t axis, double factor, const char* op) {
  require_defined(a, op);
  if (axis >= a.rank()) fail(ErrorCode::kRank, std::string(op) + ": axis out of range for " + to_string(a.shape()));
  const auto split = split_at(a.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != axis) out_shape.push_back(a.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(split.outer * split.inner, 0.0);
  const auto av = a.values();
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t e = 0; e < split.extent; ++e)
      for (std::size_t i = 0; i < split.inner; ++i)
        out[o * split.inner + i] += av[(o * split.extent + e) * split.inner + i];
  for (auto& x : out) x *= factor;
  auto backward = [split, factor](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t e = 0; e < split.extent; ++e)
        for (std::size_t i = 0; i < split.inner; ++i)
          in.grad[(o * split.extent + e) * split.inner + i] += factor * self.grad[o * split.inner + i];
  };
  return Tensor(make_result(op, std::move(out_shape), std::move(out), {a.node()}, backward,
                            a.requires_grad()));
}

}  // namespace

Tensor sum(const Tensor& a, std::size_t axis) { return reduce_axis(a, axis, 1.0, "sum"); }

Tensor mean(const Tensor& a, std::size_t axis) {
  require_defined(a, "mean");
  return reduce_axis(a, axis, 1.0 / static_cast<double>(a.dim(axis)), "mean");
}

Tensor sum_all(const Tensor& a) {
  return reduce_axis(reshape(a, {a.size()}), 0, 1.0, "sum_all");
}

double sigmoid(double x) {
  // Branching keeps exp() from overflowing for large |x|.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid", [](double x) { return sigmoid(x); },
      [](double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double y) { return 1.0 - y * y; });
}

Tensor softmax_last(const Tensor& a) {
  require_defined(a, "softmax");
  const std::size_t k = a.shape().back();
  const std::size_t rows = a.size() / k;
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = &av[r * k];
    double* y = &out[r * k];
    const double mx = *std::max_element(x, x + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < k; ++j) y[j] /= z;
  }
  auto backward = [rows, k](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = &self.value[r * k];
      const double* g = &self.grad[r * k];
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < k; ++j) in.grad[r * k + j] += y[j] * (g[j] - dot);
    }
  };
  return Tensor(make_result("softmax", a.shape(), std::move(out), {a.node()}, backward,
                            a.requires_grad()));
}

Tensor layer_norm_last(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_defined(x, "layer_norm");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    shape_mismatch("layer_norm", x.shape(), gain.shape());
  }
  if (!(eps > 0.0)) fail(ErrorCode::kInvalidArgument, "layer_norm: eps must be positive");
  const std::size_t rows = x.size() / d;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> out(xv.size());
  // Cached per row for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xv[r * d];
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  auto backward = [rows, d, xhat, inv_std](Node& self) {
    Node& in = *self.inputs[0];
    Node& g = *self.inputs[1];
    Node& b = *self.inputs[2];
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gy = &self.grad[r * d];
      const double* h = &(*xhat)[r * d];
      double mean_dh = 0.0, mean_dh_h = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (g.requires_grad) g.grad[j] += gy[j] * h[j];
        if (b.requires_grad) b.grad[j] += gy[j];
        dxhat[j] = gy[j] * g.value[j];
        mean_dh += dxhat[j];
        mean_dh_h += dxhat[j] * h[j];
      }
      if (!in.requires_grad) continue;
      mean_dh /= static_cast<double>(d);
      mean_dh_h /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        in.grad[r * d + j] += (*inv_std)[r] * (dxhat[j] - mean_dh - h[j] * mean_dh_h);
      }
    }
  };
  return Tensor(make_result("layer_norm", x.shape(), std::move(out),
                            {x.node(), gain.node(), bias.node()}, backward,
                            any_requires_grad({&x, &gain, &bias})));
}

Tensor weighted_nll(const Tensor& probs, std::span<const int> labels,
                    std::span<const double> row_weights, double normalizer, double floor) {
  require_defined(probs, "nll");
  if (probs.rank() != 2) fail(ErrorCode::kRank, "nll: probabilities must be [rows x classes]");
  const std::size_t rows = probs.dim(0), k = probs.dim(1);
  if (labels.size() != rows || row_weights.size() != rows) {
    fail(ErrorCode::kShape, "nll: " + std::to_string(rows) + " rows but " +
                                std::to_string(labels.size()) + " labels and " +
                                std::to_string(row_weights.size()) + " weights");
  }
  if (!(normalizer > 0.0)) fail(ErrorCode::kEmpty, "nll: no valid rows to normalize over");
  const auto pv = probs.values();
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0) continue;
    if (static_cast<std::size_t>(labels[r]) >= k) {
      fail(ErrorCode::kLabel, "label " + std::to_string(labels[r]) + " outside [0," + std::to_string(k) + ")");
    }
    acc += row_weights[r] * std::log(std::max(pv[r * k + labels[r]], floor));
  }
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<double> w(row_weights.begin(), row_weights.end());
  auto backward = [lab = std::move(lab), w = std::move(w), k, normalizer, floor](Node& self) {
    Node& in = *self.inputs[0];
    const double g = self.grad[0];
    for (std::size_t r = 0; r < lab.size(); ++r) {
      if (lab[r] < 0) continue;
      const std::size_t idx = r * k + static_cast<std::size_t>(lab[r]);
      const double p = in.value[idx];
      if (p > floor) in.grad[idx] -= g * w[r] / (p * normalizer);
    }
  };
  return Tensor(make_result("nll", {1}, {-acc / normalizer}, {probs.node()}, backward,
                            probs.requires_grad()));
}

// ---------------------------------------------------------------------------
// Reverse pass

Graph Graph::trace(const Tensor& root) {
  require_defined(root, "backward");
  Graph g;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS: a node is emitted after all of its inputs.
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (root.requires_grad()) {
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
  }
  g.keep_alive_.push_back(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      g.order_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

void backward(const Tensor& root) {
  require_defined(root, "backward");
  if (root.size() != 1) {
    fail(ErrorCode::kRank, "backward needs a scalar root, got " + to_string(root.shape()));
  }
  const Graph g = Graph::trace(root);
  for (Node* n : g.order()) {
    if (n->backward) {
      n->grad.assign(n->value.size(), 0.0);
    } else if (n->grad.size() != n->value.size()) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  if (g.size() == 0) return;
  Node* top = g.order().back();
  top->grad[0] += 1.0;
  for (auto it = g.order().rbegin(); it != g.order().rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->backward(*n);
      // Intermediate gradients are not needed once propagated.
      std::vector<double>().swap(n->grad);
    }
  }
}

void backward(const Tensor& root, std::span<Tensor> leaves) {
  for (auto& leaf : leaves) leaf.zero_grad();
  backward(root);
}

double finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> params, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    fail(ErrorCode::kDeterminism, "finite difference step must be positive and finite");
  }
  for (const auto& p : params) {
    if (!p.is_leaf()) fail(ErrorCode::kInvalidArgument, "finite_diff_check: parameters must be leaves");
  }
  const Tensor first = f();
  const Tensor second = f();
  if (first.size() != 1) fail(ErrorCode::kRank, "finite_diff_check: f must return a scalar");
  const double v1 = first.item(), v2 = second.item();
  if (std::memcmp(&v1, &v2, sizeof(double)) != 0) {
    fail(ErrorCode::kDeterminism, "finite_diff_check: f is not deterministic (stochastic mode enabled?)");
  }
  backward(first, params);

  double worst = 0.0;
  for (auto& p : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto vals = p.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double up = f().item();
      vals[i] = saved - h;
      const double down = f().item();
      vals[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

}  // namespace ernetcl
