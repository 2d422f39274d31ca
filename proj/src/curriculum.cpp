// SPDX-License-Identifier: Apache-2.0
#include "curriculum.hpp"

#include <algorithm>
#include <vector>

#include "error.hpp"

namespace ernetcl::curriculum {

std::map<std::string, ShiftCount> speaker_shift_counts(const Conversation& conv) {
  std::map<std::string, ShiftCount> counts;
  std::map<std::string, int> last_label;
  for (const auto& u : conv.utterances) {
    auto& c = counts[u.speaker];
    auto [it, first] = last_label.try_emplace(u.speaker, u.label);
    if (!first) {
      if (it->second != u.label) ++c.shifts;
      it->second = u.label;
    }
    ++c.utterances;
  }
  return counts;
}

double difficulty(const Conversation& conv) {
  if (conv.utterances.empty()) {
    fail(ErrorCode::kEmpty, "difficulty: conversation '" + conv.id + "' has no utterances");
  }
  // Speakers are summed in order of first appearance so the result does not
  // depend on how they are named.
  const auto counts = speaker_shift_counts(conv);
  std::vector<const std::string*> order;
  for (const auto& u : conv.utterances) {
    if (std::find_if(order.begin(), order.end(), [&](const std::string* s) { return *s == u.speaker; }) ==
        order.end()) {
      order.push_back(&u.speaker);
    }
  }
  double total = 0.0;
  for (const std::string* s : order) {
    const ShiftCount& c = counts.at(*s);
    total += static_cast<double>(c.shifts) / static_cast<double>(c.utterances);
  }
  return total / static_cast<double>(order.size());
}

void Schedule::validate() const {
  if (!(sigma > 0.0 && sigma <= 1.0)) fail(ErrorCode::kConfig, "curriculum sigma must lie in (0, 1]");
  if (!(delta >= 1.0)) fail(ErrorCode::kConfig, "curriculum delta must be >= 1");
  if (max_epochs == 0) fail(ErrorCode::kConfig, "curriculum needs max_epochs >= 1");
}

double epoch_ratio(std::size_t epoch, const Schedule& sched) {
  sched.validate();
  if (epoch < 1 || epoch > sched.max_epochs) {
    fail(ErrorCode::kRange, "epoch " + std::to_string(epoch) + " outside [1, " +
                                std::to_string(sched.max_epochs) + "]");
  }
  return static_cast<double>(epoch) / (sched.delta * static_cast<double>(sched.max_epochs));
}

double weight(std::size_t epoch, double difficulty, const Schedule& sched) {
  return sigmoid((epoch_ratio(epoch, sched) - difficulty) / sched.sigma);
}

Tensor cl_loss(const Tensor& probs, std::span<const int> labels,
               std::span<const double> conv_weights, std::span<const std::uint8_t> valid) {
  const std::size_t k = probs.shape().back();
  const std::size_t rows = probs.size() / k;
  if (labels.size() != rows || valid.size() != rows) {
    fail(ErrorCode::kShape, "cl_loss: " + std::to_string(rows) + " prediction rows but " +
                                std::to_string(labels.size()) + " labels / " +
                                std::to_string(valid.size()) + " mask entries");
  }
  if (conv_weights.empty() || rows % conv_weights.size() != 0 ||
      (probs.rank() == 3 && probs.dim(0) != conv_weights.size())) {
    fail(ErrorCode::kShape, "cl_loss: " + std::to_string(conv_weights.size()) +
                                " conversation weights for prediction block " + to_string(probs.shape()));
  }
  const std::size_t per_conv = rows / conv_weights.size();
  std::vector<int> lab(rows, -1);
  std::vector<double> w(rows, 0.0);
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!valid[r]) continue;
    if (labels[r] < 0) fail(ErrorCode::kLabel, "cl_loss: negative label on a valid row");
    lab[r] = labels[r];
    w[r] = conv_weights[r / per_conv];
    ++n;
  }
  return weighted_nll(reshape(probs, {rows, k}), lab, w, static_cast<double>(n));
}

}  // namespace ernetcl::curriculum
