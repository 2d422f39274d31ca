// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "curriculum.hpp"
#include "data.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"
#include "spatial_encoder.hpp"
#include "temp_dir.hpp"
#include "train.hpp"

namespace {

using namespace ernetcl;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Rng rng_for(int criterion) { return Rng(0xe7c1ULL * 1000 + static_cast<unsigned>(criterion)); }

// 1 ------------------------------------------------------------------------

Outcome reproducibility_statement() {
  const std::string readme = slurp(std::string(ERNETCL_SOURCE_DIR) + "/README.md");
  const bool stated = readme.find("NOT reproducible") != std::string::npos &&
                      readme.find("69.73") != std::string::npos;
  return {stated, stated ? "README states that benchmark scores (e.g. IEMOCAP weighted F1 69.73) are not "
                           "reproducible without the original feature files; criteria 2-12 substitute"
                         : "README lacks the non-reproducibility statement"};
}

// 2 ------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto start = Clock::now();
  Rng rng = rng_for(2);
  const ModelConfig cfg = testing::small_config(3);
  const ModelParams params = init_params(cfg, rng);
  const auto ds = testing::random_dataset({3}, cfg.feature_dim, 3, rng);
  const auto batch = testing::whole_batch(ds);
  std::vector<Tensor> leaves = params.parameters();
  auto f = [&] {
    Rng unused(0);
    return standard_loss(forward(batch, params, nn::Mode::kTrain, unused), batch.labels, batch.valid);
  };
  const double worst = finite_diff_check(f, leaves, 1e-5);
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0,
          std::to_string(params.parameter_count()) + " parameters, max relative error " + fmt("%.3g", worst) +
              ", " + fmt("%.2f s", secs)};
}

// 3 ------------------------------------------------------------------------

Outcome loss_reduction() {
  Rng rng = rng_for(3);
  std::uniform_int_distribution<std::size_t> size(1, 6), len(1, 9), classes(2, 7);
  std::uniform_real_distribution<double> logit(-4.0, 4.0);
  double worst = 0.0;
  for (int b = 0; b < 50; ++b) {
    const std::size_t bs = size(rng), l = len(rng), k = classes(rng);
    std::vector<double> logits(bs * l * k);
    for (double& x : logits) x = logit(rng);
    const Tensor probs = softmax_last(Tensor::from_values({bs, l, k}, logits));
    std::vector<int> labels(bs * l);
    nn::RowMask valid(bs * l, 0);
    for (std::size_t i = 0; i < bs; ++i) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, l)(rng);
      for (std::size_t t = 0; t < l; ++t) {
        valid[i * l + t] = t < n;
        labels[i * l + t] = t < n ? static_cast<int>(rng() % k) : data::kPadLabel;
      }
    }
    const std::vector<double> ones(bs, 1.0);
    const double cl = curriculum::cl_loss(probs, labels, ones, valid).item();
    const double std_loss = standard_loss(probs, labels, valid).item();
    worst = std::max(worst, std::abs(cl - std_loss));
  }
  return {worst <= 1e-12, "50 batches, max |cl_loss - standard_loss| = " + fmt("%.3g", worst)};
}

// 4 ------------------------------------------------------------------------

Outcome curriculum_oracles() {
  Rng rng = rng_for(4);
  // Difficulty against the pairwise scan on synthetic conversations.
  std::size_t checked = 0, mismatches = 0;
  while (checked < 1000) {
    data::SynthSpec spec;
    spec.num_conversations = 100;
    spec.speakers_per_conv = 1 + checked / 100 % 4;
    spec.len_min = 1;
    spec.len_max = 20;
    spec.shift_prob = static_cast<double>(checked / 100) / 9.0;
    for (const auto& c : data::synthesize(spec, rng).conversations) {
      if (curriculum::difficulty(c) != oracle::difficulty(c)) ++mismatches;
      ++checked;
    }
  }

  // Monotonicity on a randomized 20 x 20 grid per reported schedule.
  std::size_t violations = 0, comparisons = 0, half_failures = 0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& name : preset_names()) {
    const ModelConfig cfg = preset(name);
    const curriculum::Schedule s{cfg.sigma, cfg.delta, cfg.max_epochs};
    std::vector<std::size_t> ts(20);
    std::vector<double> ds(20);
    for (auto& t : ts) t = 1 + static_cast<std::size_t>(unit(rng) * static_cast<double>(s.max_epochs - 1));
    for (auto& d : ds) d = unit(rng);
    std::sort(ts.begin(), ts.end());
    std::sort(ds.begin(), ds.end());
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t j = 0; j < 20; ++j) {
        const double w = curriculum::weight(ts[i], ds[j], s);
        if (ts[i] < s.max_epochs) {
          ++comparisons;
          if (!(curriculum::weight(ts[i] + 1, ds[j], s) > w)) ++violations;
        }
        if (i + 1 < 20 && ts[i + 1] > ts[i]) {
          ++comparisons;
          if (!(curriculum::weight(ts[i + 1], ds[j], s) > w)) ++violations;
        }
        if (j + 1 < 20 && ds[j + 1] > ds[j]) {
          ++comparisons;
          if (!(curriculum::weight(ts[i], ds[j + 1], s) < w)) ++violations;
        }
      }
      const double r = curriculum::epoch_ratio(ts[i], s);
      if (curriculum::weight(ts[i], r, s) != 0.5) ++half_failures;
    }
  }
  const bool pass = mismatches == 0 && violations == 0 && half_failures == 0;
  return {pass, std::to_string(checked) + " conversations, " + std::to_string(mismatches) +
                    " oracle mismatches; " + std::to_string(comparisons) + " monotonicity checks, " +
                    std::to_string(violations) + " violations; weight(R=D) != 0.5 in " +
                    std::to_string(half_failures) + " cases"};
}

// 5 ------------------------------------------------------------------------

Outcome named_value() {
  // sigmoid(0.25), 30-digit reference.
  constexpr double kExpected = 0.562176500885798104;
  const double w = curriculum::weight(100, 0.0, {0.4, 10.0, 100});
  const double err = std::abs(w - kExpected);
  return {err <= 1e-6, "omega = " + fmt("%.12f", w) + ", |error| = " + fmt("%.3g", err)};
}

// 6 ------------------------------------------------------------------------

Outcome metric_oracle() {
  Rng rng = rng_for(6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = std::uniform_int_distribution<int>(2, 8)(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    std::vector<int> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % static_cast<unsigned>(k));
      p[i] = rng() % 2 ? y[i] : static_cast<int>(rng() % static_cast<unsigned>(k));
    }
    const int neutral = static_cast<int>(rng() % static_cast<unsigned>(k));
    const auto cm = metrics::confusion_matrix(y, p, static_cast<std::size_t>(k));
    const auto report = metrics::make_report(cm, {}, neutral);
    const auto o = oracle::f1(y, p, k);
    const auto ox = oracle::f1(y, p, k, {neutral});
    worst = std::max({worst, std::abs(report.weighted_f1 - o.weighted), std::abs(report.micro_f1 - o.micro),
                      std::abs(report.macro_f1 - o.macro), std::abs(*report.micro_f1_excl_neutral - ox.micro)});
  }
  const std::vector<int> y{0, 0, 1, 1, 2}, p{0, 1, 1, 1, 2};
  const auto cm = metrics::confusion_matrix(y, p, 3);
  const double w = metrics::aggregate(cm, metrics::Average::kWeighted);
  const double mi = metrics::aggregate(cm, metrics::Average::kMicro);
  const double ma = metrics::aggregate(cm, metrics::Average::kMacro);
  const bool example = std::abs(w - 0.786666666666666667) < 1e-12 && std::abs(mi - 0.8) < 1e-12 &&
                       std::abs(ma - 0.822222222222222222) < 1e-12;
  return {worst <= 1e-12 && example, "100 random sets, max deviation " + fmt("%.3g", worst) +
                                         "; worked example weighted " + fmt("%.4f", w) + ", micro " +
                                         fmt("%.4f", mi) + ", macro " + fmt("%.4f", ma)};
}

// 7 ------------------------------------------------------------------------

Outcome overfit() {
  const auto start = Clock::now();
  Rng rng = rng_for(7);
  data::SynthSpec spec;
  spec.num_conversations = 70;
  spec.num_classes = 4;
  spec.feature_dim = 16;
  spec.class_separation = 10.0;
  spec.len_min = 4;
  spec.len_max = 10;
  data::Dataset all = data::synthesize(spec, rng);
  data::Dataset train_ds = all, held_out = all;
  train_ds.conversations.resize(50);
  held_out.conversations.erase(held_out.conversations.begin(), held_out.conversations.begin() + 50);

  ModelConfig cfg;
  cfg.depth_te = 1;
  cfg.depth_se = 1;
  cfg.heads = 4;
  cfg.dropout = 0.0;
  cfg.max_epochs = 30;
  cfg.batch_size = 10;
  cfg.learning_rate = 3e-3;
  // Model selection on the training split keeps the held-out split unseen.
  const TrainResult r = train(cfg, train_ds, train_ds, {});
  const double train_acc = evaluate(r.best, train_ds).accuracy;
  const double held_acc = evaluate(r.best, held_out).accuracy;
  const double secs = seconds_since(start);
  return {train_acc >= 0.99 && held_acc >= 0.90 && secs < 300.0,
          "train accuracy " + fmt("%.4f", train_acc) + " (best epoch " + std::to_string(r.history.best_epoch) +
              "), held-out accuracy " + fmt("%.4f", held_acc) + ", " + fmt("%.1f s", secs)};
}

// 8 ------------------------------------------------------------------------

Outcome curriculum_behavior() {
  Rng rng = rng_for(8);
  data::SynthSpec spec;
  spec.num_conversations = 40;
  spec.len_min = 4;
  spec.len_max = 12;
  spec.shift_prob = 0.0;
  data::Dataset mixed = data::synthesize(spec, rng);
  const std::size_t n_easy = mixed.conversations.size();
  spec.shift_prob = 1.0;
  for (auto& c : data::synthesize(spec, rng).conversations) mixed.conversations.push_back(std::move(c));

  const ModelConfig cfg = preset("meld");
  const curriculum::Schedule sched{cfg.sigma, cfg.delta, cfg.max_epochs};
  std::vector<double> difficulties;
  for (const auto& c : mixed.conversations) difficulties.push_back(c.difficulty);

  std::vector<double> relative, absolute;
  for (std::size_t t = 1; t <= sched.max_epochs; ++t) {
    const auto w = conversation_weights(difficulties, t, sched, false);
    const double easy = std::accumulate(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n_easy), 0.0) /
                        static_cast<double>(n_easy);
    const double hard = std::accumulate(w.begin() + static_cast<std::ptrdiff_t>(n_easy), w.end(), 0.0) /
                        static_cast<double>(w.size() - n_easy);
    relative.push_back(1.0 - hard / easy);
    absolute.push_back(easy - hard);
  }
  bool shrinking = true;
  for (std::size_t i = 1; i < relative.size(); ++i) shrinking = shrinking && relative[i] < relative[i - 1];
  const bool below_at_start = absolute.front() > 0.0;
  return {below_at_start && shrinking,
          "epoch 1 gap " + fmt("%.4f", absolute.front()) + " (easy > hard); relative gap 1 - hard/easy " +
              fmt("%.4f", relative.front()) + " -> " + fmt("%.4f", relative.back()) +
              (shrinking ? ", strictly decreasing" : ", NOT decreasing") + "; absolute gap at T " +
              fmt("%.4f", absolute.back())};
}

// 9 ------------------------------------------------------------------------

std::string run(const std::string& cmd, int& status) {
  std::string out;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  status = ::pclose(pipe);
  return out;
}

Outcome ablation_harness() {
  testing::TempDir dir;
  const std::string cli = ERNETCL_CLI_PATH;
  {
    std::ofstream spec(dir.file("synth.spec"));
    spec << "num_conversations = 24\nnum_classes = 4\nfeature_dim = 8\nlen_min = 3\nlen_max = 8\n"
            "class_separation = 4\nshift_prob = 0.4\nneutral_index = 0\n";
    std::ofstream cfg(dir.file("run.cfg"));
    cfg << "heads = 2\ndepth_te = 1\ndepth_se = 1\nmax_epochs = 5\nbatch_size = 8\nlearning_rate = 1e-3\n";
  }
  int status = 0;
  std::string log;
  run(cli + " synth --spec " + dir.file("synth.spec") + " --out " + dir.file("train.jsonl") + " --seed 1", status);
  if (status != 0) return {false, "synth failed"};
  run(cli + " synth --spec " + dir.file("synth.spec") + " --out " + dir.file("val.jsonl") + " --seed 2", status);
  if (status != 0) return {false, "synth failed"};

  std::string detail;
  bool ok = true;
  for (const std::string flag : {"--no-te", "--no-se", "--no-cl"}) {
    const std::string ckpt = dir.file("model" + flag + ".ckpt");
    const std::string out = run(cli + " train --config " + dir.file("run.cfg") + " --train " +
                                    dir.file("train.jsonl") + " --val " + dir.file("val.jsonl") + " --out " + ckpt +
                                    " " + flag,
                                status);
    std::size_t epochs = 0;
    for (std::size_t pos = 0; (pos = out.find("epoch ", pos)) != std::string::npos; ++pos) {
      if (pos == 0 || out[pos - 1] == '\n') ++epochs;
    }
    if (status != 0 || epochs != 5) {
      ok = false;
      detail += flag + ": train failed (" + std::to_string(epochs) + " epochs); ";
      continue;
    }
    const std::string report = run(cli + " eval --ckpt " + ckpt + " --data " + dir.file("val.jsonl") + " --format kv",
                                   status);
    std::map<std::string, double> kv;
    std::istringstream lines(report);
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = std::strtod(line.c_str() + eq + 1, nullptr);
    }
    bool valid = status == 0;
    for (const char* key : {"accuracy", "weighted_f1", "micro_f1", "macro_f1", "micro_f1_excl_neutral"}) {
      valid = valid && kv.count(key) && kv[key] >= 0.0 && kv[key] <= 1.0;
    }
    ok = ok && valid;
    detail += flag + (valid ? ": 5 epochs, weighted_f1 " + fmt("%.3f", kv["weighted_f1"]) : ": invalid report") + "; ";
  }
  return {ok, detail};
}

// 10 -----------------------------------------------------------------------

Outcome determinism() {
  testing::TempDir dir;
  Rng rng = rng_for(10);
  data::SynthSpec spec;
  spec.num_conversations = 20;
  spec.feature_dim = 8;
  const data::Dataset train_ds = data::synthesize(spec, rng);
  spec.num_conversations = 8;
  const data::Dataset val_ds = data::synthesize(spec, rng);
  ModelConfig cfg;
  cfg.heads = 2;
  cfg.depth_te = 1;
  cfg.depth_se = 2;
  cfg.dropout = 0.2;
  cfg.max_epochs = 4;
  cfg.batch_size = 6;
  cfg.learning_rate = 1e-3;
  cfg.seed = 12345;
  const TrainResult a = train(cfg, train_ds, val_ds, {});
  const TrainResult b = train(cfg, train_ds, val_ds, {});
  save_checkpoint(a.best, dir.file("a.ckpt"));
  save_checkpoint(b.best, dir.file("b.ckpt"));
  const bool same_ckpt = slurp(dir.file("a.ckpt")) == slurp(dir.file("b.ckpt"));
  const bool same_history = a.history.same_result(b.history);
  return {same_ckpt && same_history, std::string("checkpoints ") + (same_ckpt ? "identical" : "DIFFER") +
                                         ", histories " + (same_history ? "identical" : "DIFFER") + " over " +
                                         std::to_string(a.history.epochs.size()) + " epochs with dropout"};
}

// 11 -----------------------------------------------------------------------

Outcome permutation_equivariance() {
  Rng rng = rng_for(11);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 8, len = 2 + static_cast<std::size_t>(trial % 9);
    const auto p = se::SeLayerParams::init(d, trial % 2 ? 2 : 4, 0.0, rng);
    const Tensor x = alloc({len, d}, Init::uniform(-3, 3), rng, false);
    std::vector<std::size_t> perm(len);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Tensor> rows;
    for (std::size_t i : perm) rows.push_back(slice(x, i, i + 1, 0));
    const nn::RowMask mask(len, 1);
    const Tensor lhs = se::se_layer(concat(rows, 0), mask, p, nn::Mode::kEval, rng);
    const Tensor y = se::se_layer(x, mask, p, nn::Mode::kEval, rng);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(lhs.at(i, c) - y.at(perm[i], c)));
  }
  return {worst <= 1e-10, "50 random inputs/permutations, max deviation " + fmt("%.3g", worst)};
}

// 12 -----------------------------------------------------------------------

Outcome round_trips() {
  testing::TempDir dir;
  Rng rng = rng_for(12);
  data::SynthSpec spec;
  spec.num_conversations = 15;
  spec.feature_dim = 8;
  spec.neutral_index = 2;
  data::Dataset ds = data::synthesize(spec, rng);
  ds.conversations[0].utterances[0].features[0] = 4.9406564584124654e-324;
  ds.conversations[0].utterances[0].features[1] = 0.1 + 0.2;

  ModelConfig cfg;
  cfg.heads = 2;
  cfg.depth_te = 1;
  cfg.depth_se = 1;
  cfg.max_epochs = 2;
  cfg.batch_size = 4;
  const TrainResult r = train(cfg, ds, ds, {});

  save_checkpoint(r.best, dir.file("m.ckpt"));
  const Checkpoint back = load_checkpoint(dir.file("m.ckpt"));
  bool ckpt_ok = back.config == r.best.config;
  const auto pa = r.best.params.named_parameters(), pb = back.params.named_parameters();
  ckpt_ok = ckpt_ok && pa.size() == pb.size();
  for (std::size_t i = 0; ckpt_ok && i < pa.size(); ++i) {
    ckpt_ok = pa[i].first == pb[i].first && pa[i].second.shape() == pb[i].second.shape() &&
              same_bits(pa[i].second.values(), pb[i].second.values());
  }
  save_checkpoint(back, dir.file("m2.ckpt"));
  ckpt_ok = ckpt_ok && slurp(dir.file("m.ckpt")) == slurp(dir.file("m2.ckpt"));

  data::save_dataset(ds, dir.file("d.jsonl"));
  const data::Dataset loaded = data::load_dataset(dir.file("d.jsonl"));
  bool data_ok = loaded.label_names == ds.label_names && loaded.neutral_index == ds.neutral_index &&
                 loaded.conversations.size() == ds.conversations.size();
  for (std::size_t i = 0; data_ok && i < ds.conversations.size(); ++i) {
    data_ok = loaded.conversations[i].id == ds.conversations[i].id &&
              loaded.conversations[i].utterances == ds.conversations[i].utterances &&
              loaded.conversations[i].difficulty == ds.conversations[i].difficulty;
  }

  const auto records = encode_features(r.best, ds);
  dump_features(r.best, ds, dir.file("f.tsv"));
  const auto parsed = read_feature_dump(dir.file("f.tsv"));
  bool dump_ok = parsed.size() == records.size();
  for (std::size_t i = 0; dump_ok && i < parsed.size(); ++i) {
    dump_ok = parsed[i].conv_id == records[i].conv_id && parsed[i].index == records[i].index &&
              parsed[i].label == records[i].label && same_bits(parsed[i].values, records[i].values);
  }
  return {ckpt_ok && data_ok && dump_ok, std::string("checkpoint ") + (ckpt_ok ? "bitwise" : "MISMATCH") +
                                             ", dataset " + (data_ok ? "exact" : "MISMATCH") + ", feature dump " +
                                             (dump_ok ? "lossless" : "MISMATCH") + " (" +
                                             std::to_string(records.size()) + " records)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"paper-scale non-reproducibility stated", reproducibility_statement},
      {"end-to-end gradient check", gradient_suite},
      {"curriculum loss with unit weights equals standard loss", loss_reduction},
      {"curriculum oracles", curriculum_oracles},
      {"named weight value", named_value},
      {"metric oracle", metric_oracle},
      {"overfit on separable synthetic data", overfit},
      {"curriculum behavior on mixed difficulty", curriculum_behavior},
      {"ablation harness", ablation_harness},
      {"determinism", determinism},
      {"spatial encoder permutation equivariance", permutation_equivariance},
      {"round trips", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
