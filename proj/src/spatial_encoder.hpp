// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nn.hpp"

namespace ernetcl::se {

/// Pre-softmax score assigned to masked keys.
inline constexpr double kMaskedScore = -1e9;

/// Per-head projections are bias-free; the output projection carries a bias.
struct MhaParams {
  std::vector<Tensor> query;  // H x [d_k x d]
  std::vector<Tensor> key;
  std::vector<Tensor> value;
  nn::AffineParams output;    // [d x H*d_k]

  std::size_t heads() const { return query.size(); }
  std::size_t model_dim() const { return output.out_dim(); }
  std::size_t head_dim() const { return query.empty() ? 0 : query.front().dim(0); }

  static MhaParams init(std::size_t dim, std::size_t heads, Rng& rng);
};

struct SeLayerParams {
  MhaParams mha;
  nn::NormParams norm;
  double dropout_rate = 0.0;

  static SeLayerParams init(std::size_t dim, std::size_t heads, double dropout_rate, Rng& rng);
};

/// softmax(q k^T / sqrt(d_k) + key_mask) v for q, k, v of shape [L x d_k].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> key_mask);

/// Attention probabilities [L x L] for the same inputs; rows sum to one over
/// valid keys.
Tensor attention_weights(const Tensor& q, const Tensor& k,
                         std::span<const std::uint8_t> key_mask);

Tensor multi_head_attention(const Tensor& x, std::span<const std::uint8_t> mask,
                            const MhaParams& p);

/// X' = LN(X + Dropout(MHA(X))); rows with mask 0 are excluded from
/// attention and zero in the output.
Tensor se_layer(const Tensor& x, std::span<const std::uint8_t> mask, const SeLayerParams& p,
                nn::Mode mode, Rng& rng);

}  // namespace ernetcl::se
