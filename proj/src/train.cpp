// SPDX-License-Identifier: Apache-2.0
#include "train.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "optim.hpp"

namespace ernetcl {

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

Rng stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return Rng(seq);
}

enum Stream : std::uint32_t { kInit = 1, kShuffle = 2, kDropout = 3 };

void check_dataset(const ModelConfig& cfg, const data::Dataset& ds, const char* role) {
  if (ds.conversations.empty()) fail(ErrorCode::kEmpty, std::string(role) + " dataset is empty");
  if (ds.feature_dim() != cfg.feature_dim) {
    fail(ErrorCode::kConfig, std::string(role) + " features are " + std::to_string(ds.feature_dim()) +
                                 "-dim, model expects " + std::to_string(cfg.feature_dim));
  }
  for (const auto& c : ds.conversations) {
    for (const auto& u : c.utterances) {
      if (u.label < 0 || static_cast<std::size_t>(u.label) >= cfg.num_classes) {
        fail(ErrorCode::kConfig, std::string(role) + " conversation '" + c.id + "' has label " +
                                     std::to_string(u.label) + " but the model has " +
                                     std::to_string(cfg.num_classes) + " classes");
      }
    }
  }
}

}  // namespace

bool EpochRecord::same_result(const EpochRecord& o) const {
  return epoch == o.epoch && same_bits(train_loss, o.train_loss) && same_bits(val_loss, o.val_loss) &&
         same_bits(val_weighted_f1, o.val_weighted_f1) && same_bits(val_micro_f1, o.val_micro_f1) &&
         same_bits(mean_weight, o.mean_weight);
}

bool RunHistory::same_result(const RunHistory& o) const {
  if (best_epoch != o.best_epoch || epochs.size() != o.epochs.size()) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (!epochs[i].same_result(o.epochs[i])) return false;
  }
  return true;
}

std::vector<double> conversation_weights(std::span<const double> difficulties, std::size_t epoch,
                                         const curriculum::Schedule& sched, bool no_cl) {
  std::vector<double> w(difficulties.size(), 1.0);
  if (!no_cl) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = curriculum::weight(epoch, difficulties[i], sched);
  }
  return w;
}

ModelConfig resolve_config(ModelConfig cfg, const data::Dataset& train_ds, const data::Dataset& val_ds,
                           const TrainFlags& flags) {
  if (cfg.feature_dim == 0) cfg.feature_dim = train_ds.feature_dim();
  if (cfg.num_classes == 0) cfg.num_classes = std::max(train_ds.num_classes(), val_ds.num_classes());
  if (flags.no_te) cfg.depth_te = 0;
  if (flags.no_se) cfg.depth_se = 0;
  validate(cfg, true);
  check_dataset(cfg, train_ds, "training");
  check_dataset(cfg, val_ds, "validation");
  return cfg;
}

TrainResult train(const ModelConfig& base_cfg, const data::Dataset& train_ds, const data::Dataset& val_ds,
                  const TrainFlags& flags, const TrainHooks& hooks) {
  const ModelConfig cfg = resolve_config(base_cfg, train_ds, val_ds, flags);
  Rng init_rng = stream(cfg.seed, kInit);
  Rng shuffle_rng = stream(cfg.seed, kShuffle);
  Rng dropout_rng = stream(cfg.seed, kDropout);

  ModelParams params = init_params(cfg, init_rng);
  std::vector<Tensor> leaves = params.parameters();
  AdamW opt({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});

  TrainResult result{{cfg, params.clone()}, {}};
  double best_f1 = -1.0;
  const curriculum::Schedule sched{cfg.sigma, cfg.delta, std::max<std::size_t>(cfg.max_epochs, 1)};

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0, weight_sum = 0.0;
    std::size_t loss_rows = 0, convs = 0;
    for (const auto& batch : data::make_batches(train_ds, cfg.batch_size, shuffle_rng, true)) {
      const auto w = conversation_weights(batch.difficulties, epoch, sched, flags.no_cl);
      const Tensor probs = forward(batch, params, nn::Mode::kTrain, dropout_rng);
      const Tensor loss = curriculum::cl_loss(probs, batch.labels, w, batch.valid);
      backward(loss, leaves);
      if (cfg.grad_clip > 0.0) clip_grad_norm(leaves, cfg.grad_clip);
      opt.step(leaves);
      const std::size_t n = batch.valid_count();
      loss_sum += loss.item() * static_cast<double>(n);
      loss_rows += n;
      for (double x : w) weight_sum += x;
      convs += w.size();
      if (hooks.on_batch) hooks.on_batch(epoch, batch, probs, loss.item());
    }
    rec.train_loss = loss_sum / static_cast<double>(loss_rows);
    rec.mean_weight = weight_sum / static_cast<double>(convs);

    const Checkpoint current{cfg, params};
    const Evaluation ev = evaluate_detailed(current, val_ds);
    rec.val_loss = ev.loss;
    rec.val_weighted_f1 = ev.report.weighted_f1;
    rec.val_micro_f1 = ev.report.micro_f1;
    if (rec.val_weighted_f1 > best_f1) {
      best_f1 = rec.val_weighted_f1;
      result.best.params = params.clone();
      result.history.best_epoch = epoch;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return result;
}

Evaluation evaluate_detailed(const Checkpoint& ckpt, const data::Dataset& ds) {
  const ModelConfig& cfg = ckpt.config;
  if (ds.conversations.empty()) fail(ErrorCode::kEmpty, "evaluation dataset is empty");
  check_dataset(cfg, ds, "evaluation");
  Rng unused(0);
  std::vector<int> truth, pred;
  double loss_sum = 0.0;
  std::size_t rows = 0;
  for (const auto& batch : data::make_batches(ds, cfg.batch_size, unused, false)) {
    const Tensor probs = forward(batch, ckpt.params, nn::Mode::kEval, unused);
    const std::size_t n = batch.valid_count();
    loss_sum += standard_loss(probs, batch.labels, batch.valid).item() * static_cast<double>(n);
    rows += n;
    const std::size_t k = cfg.num_classes;
    const auto pv = probs.values();
    for (std::size_t r = 0; r < batch.valid.size(); ++r) {
      if (!batch.valid[r]) continue;
      truth.push_back(batch.labels[r]);
      pred.push_back(predict(pv.subspan(r * k, k)));
    }
  }
  std::vector<std::string> names = ds.label_names;
  if (names.size() != cfg.num_classes) names.clear();
  Evaluation ev;
  ev.report = metrics::make_report(metrics::confusion_matrix(truth, pred, cfg.num_classes), std::move(names),
                                   ds.neutral_index);
  ev.loss = loss_sum / static_cast<double>(rows);
  return ev;
}

metrics::MetricsReport evaluate(const Checkpoint& ckpt, const data::Dataset& ds) {
  return evaluate_detailed(ckpt, ds).report;
}

std::vector<FeatureRecord> encode_features(const Checkpoint& ckpt, const data::Dataset& ds) {
  check_dataset(ckpt.config, ds, "feature dump");
  Rng unused(0);
  std::vector<FeatureRecord> out;
  const std::size_t d = ckpt.config.feature_dim;
  for (const auto& conv : ds.conversations) {
    std::vector<double> block;
    block.reserve(conv.size() * d);
    for (const auto& u : conv.utterances) block.insert(block.end(), u.features.begin(), u.features.end());
    const Tensor h = encode(Tensor::from_values({conv.size(), d}, std::move(block)), conv.size(), ckpt.params,
                            nn::Mode::kEval, unused);
    const auto hv = h.values();
    for (std::size_t t = 0; t < conv.size(); ++t) {
      out.push_back({conv.id, t, conv.utterances[t].label,
                     std::vector<double>(hv.begin() + static_cast<std::ptrdiff_t>(t * d),
                                         hv.begin() + static_cast<std::ptrdiff_t>((t + 1) * d))});
    }
  }
  return out;
}

void dump_features(const Checkpoint& ckpt, const data::Dataset& ds, const std::string& path) {
  const auto records = encode_features(ckpt, ds);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write feature dump " + path);
  char buf[32];
  for (const auto& r : records) {
    out << r.conv_id << '\t' << r.index << '\t' << r.label << '\t';
    for (std::size_t j = 0; j < r.values.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r.values[j]);
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for feature dump " + path);
}

std::vector<FeatureRecord> read_feature_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open feature dump " + path);
  std::vector<FeatureRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    FeatureRecord r;
    std::string index, label, values;
    if (!std::getline(fields, r.conv_id, '\t') || !std::getline(fields, index, '\t') ||
        !std::getline(fields, label, '\t') || !std::getline(fields, values)) {
      fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    auto bad = [&] { fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": malformed number"); };
    auto parse_int = [&](const std::string& text, auto& value) {
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || end != text.data() + text.size()) bad();
    };
    parse_int(index, r.index);
    parse_int(label, r.label);
    std::istringstream vs(values);
    std::string v;
    while (std::getline(vs, v, ',')) {
      // strtod keeps subnormals exact; from_chars may reject them as out of range.
      char* end = nullptr;
      const double x = std::strtod(v.c_str(), &end);
      if (v.empty() || end != v.c_str() + v.size()) bad();
      r.values.push_back(x);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ernetcl
