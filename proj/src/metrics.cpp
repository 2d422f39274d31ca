// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "error.hpp"

namespace ernetcl::metrics {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_of(double tp, double fp, double fn) {
  const double p = ratio(tp, tp + fp);
  const double r = ratio(tp, tp + fn);
  return ratio(2.0 * p * r, p + r);
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) fail(ErrorCode::kInvalidArgument, "confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int truth, int predicted) {
  const int k = static_cast<int>(k_);
  if (truth < 0 || truth >= k || predicted < 0 || predicted >= k) {
    fail(ErrorCode::kLabel, "confusion matrix: pair (" + std::to_string(truth) + ", " +
                                std::to_string(predicted) + ") outside [0," + std::to_string(k) + ")");
  }
  ++counts_[static_cast<std::size_t>(truth) * k_ + static_cast<std::size_t>(predicted)];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(c, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, c);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    fail(ErrorCode::kShape, "confusion matrix: " + std::to_string(truth.size()) + " gold labels vs " +
                                std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

std::vector<ClassScores> f1_scores(const ConfusionMatrix& cm) {
  std::vector<ClassScores> out(cm.num_classes());
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const double fp = static_cast<double>(cm.col_sum(c)) - tp;
    const double fn = static_cast<double>(cm.row_sum(c)) - tp;
    auto& s = out[c];
    s.precision = ratio(tp, tp + fp);
    s.recall = ratio(tp, tp + fn);
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    s.support = cm.row_sum(c);
  }
  return out;
}

double aggregate(const ConfusionMatrix& cm, Average mode, std::span<const int> exclude) {
  const std::size_t k = cm.num_classes();
  std::vector<bool> keep(k, true);
  for (int c : exclude) {
    if (c < 0 || static_cast<std::size_t>(c) >= k) {
      fail(ErrorCode::kLabel, "aggregate: excluded class " + std::to_string(c) + " outside [0," + std::to_string(k) + ")");
    }
    keep[static_cast<std::size_t>(c)] = false;
  }
  if (std::none_of(keep.begin(), keep.end(), [](bool b) { return b; })) {
    fail(ErrorCode::kEmpty, "aggregate: every class is excluded");
  }
  const auto scores = f1_scores(cm);
  switch (mode) {
    case Average::kMacro: {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t c = 0; c < k; ++c) {
        if (keep[c]) {
          sum += scores[c].f1;
          ++n;
        }
      }
      return sum / static_cast<double>(n);
    }
    case Average::kWeighted: {
      double sum = 0.0, support = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (!keep[c]) continue;
        sum += static_cast<double>(scores[c].support) * scores[c].f1;
        support += static_cast<double>(scores[c].support);
      }
      return ratio(sum, support);
    }
    case Average::kMicro: {
      double tp = 0.0, fp = 0.0, fn = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (!keep[c]) continue;
        const double t = static_cast<double>(cm.at(c, c));
        tp += t;
        fp += static_cast<double>(cm.col_sum(c)) - t;
        fn += static_cast<double>(cm.row_sum(c)) - t;
      }
      return f1_of(tp, fp, fn);
    }
  }
  return 0.0;
}

MetricsReport make_report(const ConfusionMatrix& cm, std::vector<std::string> class_names,
                          std::optional<int> neutral_index) {
  if (class_names.size() != cm.num_classes()) {
    class_names.clear();
    for (std::size_t c = 0; c < cm.num_classes(); ++c) class_names.push_back(std::to_string(c));
  }
  MetricsReport r;
  r.confusion = cm;
  r.class_names = std::move(class_names);
  r.per_class = f1_scores(cm);
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) correct += cm.at(c, c);
  r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(cm.total()));
  r.weighted_f1 = aggregate(cm, Average::kWeighted);
  r.micro_f1 = aggregate(cm, Average::kMicro);
  r.macro_f1 = aggregate(cm, Average::kMacro);
  r.neutral_index = neutral_index;
  if (neutral_index && cm.num_classes() > 1) {
    const int excl[] = {*neutral_index};
    r.micro_f1_excl_neutral = aggregate(cm, Average::kMicro, excl);
  }
  return r;
}

std::string format_table(const MetricsReport& r) {
  std::size_t w = 5;
  for (const auto& n : r.class_names) w = std::max(w, n.size());
  std::ostringstream os;
  auto pad = [](const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
  };
  auto lpad = [](const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
  };
  os << pad("class", w) << "  " << lpad("precision", 9) << "  " << lpad("recall", 9) << "  "
     << lpad("f1", 9) << "  " << lpad("support", 9) << '\n';
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    os << pad(r.class_names[c], w) << "  " << lpad(fixed(s.precision), 9) << "  "
       << lpad(fixed(s.recall), 9) << "  " << lpad(fixed(s.f1), 9) << "  "
       << lpad(std::to_string(s.support), 9) << '\n';
  }
  os << '\n';
  os << pad("accuracy", 24) << fixed(r.accuracy) << '\n';
  os << pad("weighted f1", 24) << fixed(r.weighted_f1) << '\n';
  os << pad("micro f1", 24) << fixed(r.micro_f1) << '\n';
  os << pad("macro f1", 24) << fixed(r.macro_f1) << '\n';
  if (r.micro_f1_excl_neutral) {
    os << pad("micro f1 w/o neutral", 24) << fixed(*r.micro_f1_excl_neutral) << '\n';
  }
  os << "\nconfusion matrix (rows = gold, cols = predicted)\n";
  std::size_t cw = 1;
  for (std::size_t i = 0; i < r.confusion.num_classes(); ++i)
    for (std::size_t j = 0; j < r.confusion.num_classes(); ++j)
      cw = std::max(cw, std::to_string(r.confusion.at(i, j)).size());
  for (const auto& n : r.class_names) cw = std::max(cw, n.size());
  os << pad("", w);
  for (const auto& n : r.class_names) os << "  " << lpad(n, cw);
  os << '\n';
  for (std::size_t i = 0; i < r.confusion.num_classes(); ++i) {
    os << pad(r.class_names[i], w);
    for (std::size_t j = 0; j < r.confusion.num_classes(); ++j) {
      os << "  " << lpad(std::to_string(r.confusion.at(i, j)), cw);
    }
    os << '\n';
  }
  return os.str();
}

std::string format_key_values(const MetricsReport& r) {
  std::ostringstream os;
  os << "num_classes=" << r.confusion.num_classes() << '\n';
  os << "scored=" << r.confusion.total() << '\n';
  os << "accuracy=" << exact(r.accuracy) << '\n';
  os << "weighted_f1=" << exact(r.weighted_f1) << '\n';
  os << "micro_f1=" << exact(r.micro_f1) << '\n';
  os << "macro_f1=" << exact(r.macro_f1) << '\n';
  if (r.micro_f1_excl_neutral) {
    os << "micro_f1_excl_neutral=" << exact(*r.micro_f1_excl_neutral) << '\n';
  }
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    os << "class." << r.class_names[c] << ".precision=" << exact(s.precision) << '\n';
    os << "class." << r.class_names[c] << ".recall=" << exact(s.recall) << '\n';
    os << "class." << r.class_names[c] << ".f1=" << exact(s.f1) << '\n';
    os << "class." << r.class_names[c] << ".support=" << s.support << '\n';
  }
  os << "confusion=";
  for (std::size_t i = 0; i < r.confusion.num_classes(); ++i) {
    for (std::size_t j = 0; j < r.confusion.num_classes(); ++j) {
      if (i || j) os << ',';
      os << r.confusion.at(i, j);
    }
  }
  os << '\n';
  return os.str();
}

}  // namespace ernetcl::metrics
