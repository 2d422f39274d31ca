// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "nn.hpp"

namespace ernetcl::te {

/// One direction of a GRU. Gate order is (update z, reset r, candidate h).
struct GruDirection {
  Tensor w_z, w_r, w_h;  // [hidden x input]
  Tensor u_z, u_r, u_h;  // [hidden x hidden]
  Tensor b_z, b_r, b_h;  // [hidden]

  std::size_t input_dim() const { return w_z.dim(1); }
  std::size_t hidden_dim() const { return w_z.dim(0); }

  static GruDirection init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
};

struct GruParams {
  GruDirection forward;
  GruDirection backward;
};

struct TeLayerParams {
  GruParams gru;
  nn::AffineParams proj;  // 2h -> d
  nn::NormParams norm;
  double dropout_rate = 0.0;

  static TeLayerParams init(std::size_t dim, double dropout_rate, Rng& rng);
};

/// Single step: x_t is [1 x d], h_prev is [1 x h].
///   z = sig(W_z x + U_z h + b_z), r = sig(W_r x + U_r h + b_r)
///   c = tanh(W_h x + U_h (r * h) + b_h),  h' = (1 - z) * h + z * c
Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const GruDirection& p);

/// Bidirectional pass over the first `length` rows of seq [L x d], both
/// directions starting from a zero state. Rows at or past `length` are zero.
/// Returns [L x 2h] with the forward state first.
Tensor bigru(const Tensor& seq, std::size_t length, const GruParams& p);

/// X' = LN(X + Dropout(proj(BiGRU(X)))), padded rows zeroed.
Tensor te_layer(const Tensor& x, std::size_t length, const TeLayerParams& p, nn::Mode mode,
                Rng& rng);

}  // namespace ernetcl::te
