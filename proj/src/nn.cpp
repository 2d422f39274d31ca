// SPDX-License-Identifier: Apache-2.0
#include "nn.hpp"

#include <algorithm>

#include "error.hpp"

namespace ernetcl::nn {

AffineParams AffineParams::init(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  return {alloc({out_dim, in_dim}, Init::scaled_uniform(in_dim), rng),
          alloc({out_dim}, Init::zeros(), rng)};
}

NormParams NormParams::init(std::size_t dim, double eps) {
  return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true), eps};
}

Tensor linear(const Tensor& x, const AffineParams& p) {
  const Shape& s = x.shape();
  if (s.back() != p.in_dim()) {
    fail(ErrorCode::kShape, "linear: input " + to_string(s) + " does not match weight " +
                                to_string(p.weight.shape()));
  }
  if (s.size() == 2) return add(matmul(x, transpose(p.weight)), p.bias);
  const std::size_t rows = x.size() / s.back();
  Tensor flat = reshape(x, {rows, s.back()});
  Tensor y = add(matmul(flat, transpose(p.weight)), p.bias);
  Shape out = s;
  out.back() = p.out_dim();
  return reshape(y, out);
}

Tensor layer_norm(const Tensor& x, const NormParams& p) {
  return layer_norm_last(x, p.gain, p.bias, p.eps);
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorCode::kRange, "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double survivor = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = keep(rng) ? survivor : 0.0;
  return mul(x, Tensor::from_values(x.shape(), std::move(mask)));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis + 1 != x.rank()) {
    fail(ErrorCode::kInvalidArgument, "softmax is only implemented along the trailing axis");
  }
  return softmax_last(x);
}

RowMask leading_mask(std::size_t rows, std::size_t length) {
  RowMask m(rows, 0);
  for (std::size_t i = 0; i < length && i < rows; ++i) m[i] = 1;
  return m;
}

Tensor mask_rows(const Tensor& x, std::span<const std::uint8_t> valid) {
  if (x.rank() != 2 || valid.size() != x.dim(0)) {
    fail(ErrorCode::kShape, "mask_rows: mask of " + std::to_string(valid.size()) +
                                " rows for tensor " + to_string(x.shape()));
  }
  bool all = true;
  for (auto v : valid) all = all && v != 0;
  if (all) return x;
  const std::size_t cols = x.dim(1);
  std::vector<double> m(x.size(), 0.0);
  for (std::size_t r = 0; r < valid.size(); ++r) {
    if (valid[r]) std::fill_n(&m[r * cols], cols, 1.0);
  }
  return mul(x, Tensor::from_values(x.shape(), std::move(m)));
}

}  // namespace ernetcl::nn
