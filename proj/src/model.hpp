// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "spatial_encoder.hpp"
#include "temporal_encoder.hpp"

namespace ernetcl {

/// All trainable tensors: TE stack, SE stack, classifier.
struct ModelParams {
  std::vector<te::TeLayerParams> te_layers;
  std::vector<se::SeLayerParams> se_layers;
  nn::AffineParams classifier;

  /// Stable, human-readable names in a fixed order ("te.0.gru.fwd.w_z", ...).
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();
  /// Deep copy; the copy shares no storage with this one.
  ModelParams clone() const;
};

ModelParams init_params(const ModelConfig& cfg, Rng& rng);

/// TE stack then SE stack over one padded conversation block [L x d] whose
/// first `length` rows are real. Returns [L x d], padded rows zero.
Tensor encode(const Tensor& x, std::size_t length, const ModelParams& params, nn::Mode mode,
              Rng& rng);

/// Class probabilities [B x L x K]; every valid row sums to one.
Tensor forward(const data::Batch& batch, const ModelParams& params, nn::Mode mode, Rng& rng);

/// Argmax with ties going to the lowest index.
int predict(std::span<const double> probs);

/// -(1/N) sum over valid rows of log p[label].
Tensor standard_loss(const Tensor& probs, std::span<const int> labels,
                     std::span<const std::uint8_t> valid);

}  // namespace ernetcl
