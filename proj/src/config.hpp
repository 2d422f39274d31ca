// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ernetcl {

/// Everything needed to build, train and reproduce a model.
///
/// feature_dim and num_classes may be left at 0 in a config file; training
/// then adopts them from the training set.
struct ModelConfig {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::size_t depth_te = 2;
  std::size_t depth_se = 2;
  std::size_t heads = 4;
  double dropout = 0.1;
  std::size_t max_epochs = 100;
  double sigma = 0.5;  // curriculum growth rate, (0, 1]
  double delta = 10.0; // epoch ratio scale, >= 1
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  double weight_decay = 3e-4;
  std::uint64_t seed = 2023;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm; 0 disables clipping

  bool operator==(const ModelConfig&) const = default;
};

/// Hyperparameters reported for the four benchmark corpora: meld, iemocap,
/// emorynlp, dailydialog.
ModelConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Checks ranges. With `require_dims`, feature_dim and num_classes must
/// also be set.
void validate(const ModelConfig& cfg, bool require_dims);

/// Flat `key = value` text, one pair per line, '#' starts a comment. A
/// `preset = <name>` line seeds every field before the others apply.
ModelConfig parse_config(std::string_view text);
ModelConfig load_config(const std::string& path);
std::string format_config(const ModelConfig& cfg);

/// Applies one key; unknown keys and malformed values throw kConfig.
void set_config_value(ModelConfig& cfg, std::string_view key, std::string_view value);

/// Honors ERNETCL_SEED when it is set.
void apply_environment(ModelConfig& cfg);

}  // namespace ernetcl
