// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "curriculum.hpp"
#include "data.hpp"
#include "metrics.hpp"

namespace ernetcl {

/// Ablation switches. no_cl trains on the plain cross-entropy (every
/// conversation weight fixed at 1).
struct TrainFlags {
  bool no_te = false;
  bool no_se = false;
  bool no_cl = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // curriculum loss, utterance-weighted over batches
  double val_loss = 0.0;    // unweighted cross-entropy
  double val_weighted_f1 = 0.0;
  double val_micro_f1 = 0.0;
  double mean_weight = 0.0;  // mean conversation weight this epoch
  double wall_seconds = 0.0;

  /// Everything except wall time, compared bitwise.
  bool same_result(const EpochRecord& other) const;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 means the initial parameters were kept

  bool same_result(const RunHistory& other) const;
};

struct TrainResult {
  Checkpoint best;
  RunHistory history;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called after each optimizer step with the batch, its probabilities and
  /// the loss that was minimized.
  std::function<void(std::size_t epoch, const data::Batch&, const Tensor& probs, double loss)> on_batch;
};

/// Per-conversation weights for `epoch`; all ones when `no_cl`.
std::vector<double> conversation_weights(std::span<const double> difficulties, std::size_t epoch,
                                         const curriculum::Schedule& sched, bool no_cl);

/// Resolves feature_dim / num_classes from the data when unset, applies the
/// ablation flags, and checks both datasets against the result.
ModelConfig resolve_config(ModelConfig cfg, const data::Dataset& train_ds, const data::Dataset& val_ds,
                           const TrainFlags& flags);

TrainResult train(const ModelConfig& cfg, const data::Dataset& train_ds, const data::Dataset& val_ds,
                  const TrainFlags& flags, const TrainHooks& hooks = {});

struct Evaluation {
  metrics::MetricsReport report;
  double loss = 0.0;  // unweighted cross-entropy
};

Evaluation evaluate_detailed(const Checkpoint& ckpt, const data::Dataset& ds);
metrics::MetricsReport evaluate(const Checkpoint& ckpt, const data::Dataset& ds);

/// One line per valid utterance: `<conv_id>\t<index>\t<label>\t<v1,...,vd>`,
/// holding the encoder output that feeds the classifier.
struct FeatureRecord {
  std::string conv_id;
  std::size_t index = 0;
  int label = 0;
  std::vector<double> values;

  bool operator==(const FeatureRecord&) const = default;
};

std::vector<FeatureRecord> encode_features(const Checkpoint& ckpt, const data::Dataset& ds);
void dump_features(const Checkpoint& ckpt, const data::Dataset& ds, const std::string& path);
std::vector<FeatureRecord> read_feature_dump(const std::string& path);

}  // namespace ernetcl
