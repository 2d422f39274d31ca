// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace ernetcl::nn {

enum class Mode { kTrain, kEval };

struct AffineParams {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }

  // Weight scaled-uniform by fan-in, bias zero.
  static AffineParams init(std::size_t in_dim, std::size_t out_dim, Rng& rng);
};

struct NormParams {
  Tensor gain;  // [d]
  Tensor bias;  // [d]
  double eps = 1e-5;

  static NormParams init(std::size_t dim, double eps = 1e-5);
};

/// y = x W^T + b along the trailing axis.
Tensor linear(const Tensor& x, const AffineParams& p);

Tensor layer_norm(const Tensor& x, const NormParams& p);

/// Inverted dropout. In eval mode, or with rate 0, returns `x` itself.
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng);

/// Softmax along `axis`; only the trailing axis is supported.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Per-row validity flags for a [L x ...] block; nonzero means a real row.
using RowMask = std::vector<std::uint8_t>;

/// Mask with `length` leading ones out of `rows`.
RowMask leading_mask(std::size_t rows, std::size_t length);

/// Zeroes every row of a rank-2 tensor whose mask entry is 0. Returns `x`
/// itself when no row is masked.
Tensor mask_rows(const Tensor& x, std::span<const std::uint8_t> valid);

using ernetcl::sigmoid;
using ernetcl::tanh;

}  // namespace ernetcl::nn
