// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ernetcl/ernetcl.h"

namespace {

struct Deleter {
  void operator()(ern_config* p) const { ern_config_free(p); }
  void operator()(ern_dataset* p) const { ern_dataset_free(p); }
  void operator()(ern_model* p) const { ern_model_free(p); }
  void operator()(ern_history* p) const { ern_history_free(p); }
  void operator()(ern_report* p) const { ern_report_free(p); }
  void operator()(char* p) const { ern_string_free(p); }
};

template <typename T>
using Handle = std::unique_ptr<T, Deleter>;

struct Failure {
  ern_status status;
  std::string message;
};

void check(ern_status status) {
  if (status != ERN_OK) throw Failure{status, ern_last_error()};
}

Handle<ern_dataset> load_dataset(const std::string& path, const std::string& labels = {}) {
  ern_dataset* ds = nullptr;
  check(ern_dataset_load(path.c_str(), labels.empty() ? nullptr : labels.c_str(), &ds));
  return Handle<ern_dataset>(ds);
}

Handle<ern_model> load_model(const std::string& path) {
  ern_model* m = nullptr;
  check(ern_model_load(path.c_str(), &m));
  return Handle<ern_model>(m);
}

void print_epoch(const ern_epoch_info* info, void*) {
  std::printf("epoch %zu  train_loss %.6f  val_loss %.6f  val_weighted_f1 %.4f  val_micro_f1 %.4f  "
              "mean_weight %.4f  %.2fs\n",
              info->epoch, info->train_loss, info->val_loss, info->val_weighted_f1, info->val_micro_f1,
              info->mean_weight, info->wall_seconds);
  std::fflush(stdout);
}

struct TrainArgs {
  std::string config, train, val, out;
  bool no_te = false, no_se = false, no_cl = false, quiet = false;
};

void run_train(const TrainArgs& a) {
  ern_config* raw_cfg = nullptr;
  check(ern_config_load(a.config.c_str(), &raw_cfg));
  Handle<ern_config> cfg(raw_cfg);
  auto train = load_dataset(a.train);
  auto val = load_dataset(a.val);
  unsigned flags = 0;
  if (a.no_te) flags |= ERN_TRAIN_NO_TE;
  if (a.no_se) flags |= ERN_TRAIN_NO_SE;
  if (a.no_cl) flags |= ERN_TRAIN_NO_CL;
  ern_model* raw_model = nullptr;
  ern_history* raw_hist = nullptr;
  check(ern_train(cfg.get(), train.get(), val.get(), flags, a.quiet ? nullptr : print_epoch, nullptr, &raw_model,
                  &raw_hist));
  Handle<ern_model> model(raw_model);
  Handle<ern_history> hist(raw_hist);
  check(ern_model_save(model.get(), a.out.c_str()));
  std::printf("best_epoch %zu  saved %s\n", ern_history_best_epoch(hist.get()), a.out.c_str());
}

void run_eval(const std::string& ckpt, const std::string& data, const std::string& labels, const std::string& format) {
  auto model = load_model(ckpt);
  auto ds = load_dataset(data, labels);
  ern_report* raw = nullptr;
  check(ern_evaluate(model.get(), ds.get(), &raw));
  Handle<ern_report> report(raw);
  if (format == "table" || format == "both") {
    char* text = nullptr;
    check(ern_report_format_text(report.get(), ERN_REPORT_TABLE, &text));
    Handle<char> owned(text);
    std::fputs(text, stdout);
  }
  if (format == "both") std::fputs("\n", stdout);
  if (format == "kv" || format == "both") {
    char* text = nullptr;
    check(ern_report_format_text(report.get(), ERN_REPORT_KEY_VALUES, &text));
    Handle<char> owned(text);
    std::fputs(text, stdout);
  }
}

void run_difficulty(const std::string& data) {
  auto ds = load_dataset(data);
  const std::size_t n = ern_dataset_conversation_count(ds.get());
  for (std::size_t i = 0; i < n; ++i) {
    const char* id = nullptr;
    double d = 0.0;
    check(ern_dataset_conversation(ds.get(), i, &id, &d));
    std::printf("%s\t%.6f\n", id, d);
  }
}

void run_synth(const std::string& spec, const std::string& out, std::uint64_t seed) {
  ern_dataset* raw = nullptr;
  check(ern_dataset_synthesize(spec.c_str(), seed, &raw));
  Handle<ern_dataset> ds(raw);
  check(ern_dataset_save(ds.get(), out.c_str()));
  std::printf("wrote %zu conversations (%zu utterances) to %s\n", ern_dataset_conversation_count(ds.get()),
              ern_dataset_utterance_count(ds.get()), out.c_str());
}

void run_dump(const std::string& ckpt, const std::string& data, const std::string& out) {
  auto model = load_model(ckpt);
  auto ds = load_dataset(data);
  check(ern_dump_features(model.get(), ds.get(), out.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversation-level emotion classification: training, evaluation and data tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ern_version()));

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model and save the best checkpoint");
  train->add_option("--config", ta.config, "Config file (key = value)")->required();
  train->add_option("--train", ta.train, "Training dataset")->required();
  train->add_option("--val", ta.val, "Validation dataset")->required();
  train->add_option("--out", ta.out, "Checkpoint output path")->required();
  train->add_flag("--no-te", ta.no_te, "Drop the temporal encoder");
  train->add_flag("--no-se", ta.no_se, "Drop the spatial encoder");
  train->add_flag("--no-cl", ta.no_cl, "Use plain cross-entropy instead of the curriculum loss");
  train->add_flag("--quiet", ta.quiet, "Do not print per-epoch progress");

  std::string ckpt, data, labels, out, spec, format = "both";
  std::uint64_t seed = 2023;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--data", data, "Dataset")->required();
  eval->add_option("--labels", labels, "Label map (index<TAB>name, optional neutral<TAB>index)");
  eval->add_option("--format", format, "table, kv or both")->check(CLI::IsMember({"table", "kv", "both"}));

  auto* diff = app.add_subcommand("difficulty", "Print per-conversation difficulty scores");
  diff->add_option("--data", data, "Dataset")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", spec, "Synthesis spec file (key = value)")->required();
  synth->add_option("--out", out, "Output dataset path")->required();
  synth->add_option("--seed", seed, "Random seed")->required();

  auto* dump = app.add_subcommand("dump-features", "Write encoder outputs for every utterance");
  dump->add_option("--ckpt", ckpt, "Checkpoint")->required();
  dump->add_option("--data", data, "Dataset")->required();
  dump->add_option("--out", out, "Output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) run_train(ta);
    else if (*eval) run_eval(ckpt, data, labels, format);
    else if (*diff) run_difficulty(data);
    else if (*synth) run_synth(spec, out, seed);
    else if (*dump) run_dump(ckpt, data, out);
  } catch (const Failure& f) {
    std::fprintf(stderr, "ernetcl: %s: %s\n", ern_status_name(f.status), f.message.c_str());
    return 1;
  }
  return 0;
}
