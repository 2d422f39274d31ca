// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conversation.hpp"
#include "nn.hpp"
#include "tensor.hpp"

namespace ernetcl::data {

/// Label used for padded slots; never a valid class.
inline constexpr int kPadLabel = -1;

struct Dataset {
  std::vector<Conversation> conversations;
  std::vector<std::string> label_names;
  std::optional<int> neutral_index;

  std::size_t num_classes() const { return label_names.size(); }
  std::size_t feature_dim() const;
  std::size_t utterance_count() const;
};

/// Reads one conversation per line:
///   {"id": "...", "utterances": [{"speaker": "...", "label": 0, "features": [...]}, ...]}
/// A line may carry a leading `<id>\t` header; blank lines and lines starting
/// with '#' are skipped. An utterance may replace "features" with
/// {"offset": <bytes>, "dim": <d>} to read little-endian float32 values from
/// the sidecar `<path>.bin`.
///
/// The label map is read from `labels_path` or, when that is empty, from
/// `<path>.labels` if present. Without one, classes are 0..max_label.
Dataset load_dataset(const std::string& path, const std::string& labels_path = {});

/// Writes the dataset with inline features plus the `<path>.labels` sidecar.
void save_dataset(const Dataset& ds, const std::string& path);

/// `<index>\t<name>` lines, optionally followed by `neutral\t<index>`.
struct LabelMap {
  std::vector<std::string> names;
  std::optional<int> neutral_index;
};
LabelMap parse_label_map(std::string_view text);
LabelMap load_label_map(const std::string& path);
std::string format_label_map(const Dataset& ds);

/// Conversations padded to the longest one in the batch.
struct Batch {
  std::size_t size = 0;     // conversations
  std::size_t max_len = 0;
  std::size_t dim = 0;
  std::vector<double> features;     // [size x max_len x dim]
  std::vector<int> labels;          // [size x max_len], kPadLabel when padded
  nn::RowMask valid;                // [size x max_len]
  std::vector<std::size_t> lengths;
  std::vector<std::string> conv_ids;
  std::vector<double> difficulties;
  std::vector<std::size_t> conv_indices;  // into the source dataset

  /// [max_len x dim] constant block of conversation i.
  Tensor conversation_features(std::size_t i) const;
  std::span<const std::uint8_t> conversation_mask(std::size_t i) const;
  std::size_t valid_count() const;
};

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

/// Groups of at most batch_size conversations. With `shuffle`, the order is
/// drawn from `rng`; otherwise file order is kept.
std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, Rng& rng, bool shuffle);

struct SynthSpec {
  std::size_t num_conversations = 10;
  std::size_t speakers_per_conv = 2;
  std::size_t len_min = 4;
  std::size_t len_max = 8;
  std::size_t num_classes = 4;
  std::size_t feature_dim = 16;
  double class_separation = 4.0;
  double shift_prob = 0.3;
  std::optional<int> neutral_index;
};

SynthSpec parse_synth_spec(std::string_view text);
SynthSpec load_synth_spec(const std::string& path);

/// Each speaker's labels follow a Markov chain that moves to a different
/// class with probability shift_prob. Features are the class mean plus unit
/// Gaussian noise; class means sit class_separation apart.
Dataset synthesize(const SynthSpec& spec, Rng& rng);

}  // namespace ernetcl::data
