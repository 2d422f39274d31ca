// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ernetcl::metrics {

/// Rows are gold classes, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(int truth, int predicted);
  std::size_t num_classes() const { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t num_classes);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;

  bool operator==(const ClassScores&) const = default;
};

/// 0/0 resolves to 0 everywhere.
std::vector<ClassScores> f1_scores(const ConfusionMatrix& cm);

enum class Average { kWeighted, kMicro, kMacro };

/// Excluded classes drop out of averaging; for micro they are removed from
/// pooling, so a prediction of an excluded class on included gold is that
/// class's false negative, and the reverse is a false positive.
double aggregate(const ConfusionMatrix& cm, Average mode, std::span<const int> exclude = {});

struct MetricsReport {
  ConfusionMatrix confusion{1};
  std::vector<std::string> class_names;
  std::vector<ClassScores> per_class;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> micro_f1_excl_neutral;
  std::optional<int> neutral_index;

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport make_report(const ConfusionMatrix& cm, std::vector<std::string> class_names,
                          std::optional<int> neutral_index);

/// Aligned table: per-class scores, aggregates, then the confusion matrix.
std::string format_table(const MetricsReport& r);
/// `key=value` lines.
std::string format_key_values(const MetricsReport& r);

}  // namespace ernetcl::metrics
