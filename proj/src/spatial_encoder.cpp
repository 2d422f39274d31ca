// SPDX-License-Identifier: Apache-2.0
#include "spatial_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace ernetcl::se {

MhaParams MhaParams::init(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    fail(ErrorCode::kConfig, std::to_string(heads) + " heads do not divide model dim " + std::to_string(dim));
  }
  const std::size_t dk = dim / heads;
  MhaParams p;
  for (std::size_t i = 0; i < heads; ++i) {
    p.query.push_back(alloc({dk, dim}, Init::scaled_uniform(dim), rng));
    p.key.push_back(alloc({dk, dim}, Init::scaled_uniform(dim), rng));
    p.value.push_back(alloc({dk, dim}, Init::scaled_uniform(dim), rng));
  }
  p.output = nn::AffineParams::init(heads * dk, dim, rng);
  return p;
}

SeLayerParams SeLayerParams::init(std::size_t dim, std::size_t heads, double dropout_rate, Rng& rng) {
  return {MhaParams::init(dim, heads, rng), nn::NormParams::init(dim), dropout_rate};
}

Tensor attention_weights(const Tensor& q, const Tensor& k, std::span<const std::uint8_t> key_mask) {
  if (q.rank() != 2 || k.rank() != 2 || q.dim(1) != k.dim(1)) {
    fail(ErrorCode::kShape, "attention: query " + to_string(q.shape()) + " vs key " + to_string(k.shape()));
  }
  const std::size_t keys = k.dim(0);
  if (key_mask.size() != keys) {
    fail(ErrorCode::kShape, "attention: mask has " + std::to_string(key_mask.size()) + " entries for " +
                                std::to_string(keys) + " keys");
  }
  if (std::none_of(key_mask.begin(), key_mask.end(), [](auto m) { return m != 0; })) {
    fail(ErrorCode::kEmpty, "attention: every key position is masked");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt);
  if (std::any_of(key_mask.begin(), key_mask.end(), [](auto m) { return m == 0; })) {
    std::vector<double> bias(keys);
    for (std::size_t j = 0; j < keys; ++j) bias[j] = key_mask[j] ? 0.0 : kMaskedScore;
    scores = add(scores, Tensor::from_values({keys}, std::move(bias)));
  }
  return softmax_last(scores);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> key_mask) {
  if (v.rank() != 2 || v.dim(0) != k.dim(0)) {
    fail(ErrorCode::kShape, "attention: value " + to_string(v.shape()) + " vs key " + to_string(k.shape()));
  }
  return matmul(attention_weights(q, k, key_mask), v);
}

Tensor multi_head_attention(const Tensor& x, std::span<const std::uint8_t> mask, const MhaParams& p) {
  const std::size_t heads = p.heads();
  if (heads == 0 || p.model_dim() % heads != 0 || p.head_dim() * heads != p.model_dim()) {
    fail(ErrorCode::kConfig, "multi-head attention: " + std::to_string(heads) +
                                 " heads do not divide model dim " + std::to_string(p.model_dim()));
  }
  if (x.rank() != 2 || x.dim(1) != p.model_dim()) {
    fail(ErrorCode::kShape, "multi-head attention: input " + to_string(x.shape()) +
                                " does not match model dim " + std::to_string(p.model_dim()));
  }
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    const Tensor q = matmul(x, transpose(p.query[i]));
    const Tensor k = matmul(x, transpose(p.key[i]));
    const Tensor v = matmul(x, transpose(p.value[i]));
    outs.push_back(scaled_dot_attention(q, k, v, mask));
  }
  return nn::linear(heads == 1 ? outs.front() : concat(outs, 1), p.output);
}

Tensor se_layer(const Tensor& x, std::span<const std::uint8_t> mask, const SeLayerParams& p,
                nn::Mode mode, Rng& rng) {
  const Tensor a = nn::dropout(multi_head_attention(x, mask, p.mha), p.dropout_rate, mode, rng);
  const Tensor y = nn::layer_norm(add(x, a), p.norm);
  return nn::mask_rows(y, mask);
}

}  // namespace ernetcl::se
