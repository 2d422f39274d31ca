// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "conversation.hpp"
#include "tensor.hpp"

namespace ernetcl::curriculum {

struct ShiftCount {
  std::size_t shifts = 0;      // adjacent label changes within the speaker's turns
  std::size_t utterances = 0;

  bool operator==(const ShiftCount&) const = default;
};

std::map<std::string, ShiftCount> speaker_shift_counts(const Conversation& conv);

/// Mean over speakers of shifts / utterances, in [0, 1].
double difficulty(const Conversation& conv);

/// sigma in (0, 1], delta >= 1, max_epochs >= 1.
struct Schedule {
  double sigma = 0.5;
  double delta = 1.0;
  std::size_t max_epochs = 1;

  void validate() const;
};

/// t / (delta * T) for a 1-based epoch t in [1, T].
double epoch_ratio(std::size_t epoch, const Schedule& sched);

/// sigmoid((R(t) - D) / sigma).
double weight(std::size_t epoch, double difficulty, const Schedule& sched);

/// -(1/N) sum over valid rows of w_conv * log p[label]. probs is [B x L x K]
/// (or [B*L x K]); labels/valid are row-major [B x L]; one weight per
/// conversation. N counts valid rows, not the weight sum.
Tensor cl_loss(const Tensor& probs, std::span<const int> labels,
               std::span<const double> conv_weights, std::span<const std::uint8_t> valid);

}  // namespace ernetcl::curriculum
