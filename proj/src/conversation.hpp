// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace ernetcl {

struct Utterance {
  std::string speaker;
  int label = 0;
  std::vector<double> features;

  bool operator==(const Utterance&) const = default;
};

/// Utterances in chronological order.
struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;
  // Cached at load time from gold labels.
  double difficulty = 0.0;

  std::size_t size() const { return utterances.size(); }
};

}  // namespace ernetcl
