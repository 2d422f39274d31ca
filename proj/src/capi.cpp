// SPDX-License-Identifier: Apache-2.0
#include "ernetcl/ernetcl.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "train.hpp"

struct ern_config {
  ernetcl::ModelConfig value;
};

struct ern_dataset {
  ernetcl::data::Dataset value;
};

struct ern_model {
  ernetcl::Checkpoint value;
};

struct ern_history {
  ernetcl::RunHistory value;
};

struct ern_report {
  ernetcl::metrics::MetricsReport value;
};

namespace {

thread_local std::string g_last_error;

ern_status to_status(ernetcl::ErrorCode code) {
  using ernetcl::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return ERN_ERR_INVALID_ARGUMENT;
    case ErrorCode::kShape: return ERN_ERR_SHAPE;
    case ErrorCode::kRank: return ERN_ERR_RANK;
    case ErrorCode::kRange: return ERN_ERR_RANGE;
    case ErrorCode::kConfig: return ERN_ERR_CONFIG;
    case ErrorCode::kLabel: return ERN_ERR_LABEL;
    case ErrorCode::kParse: return ERN_ERR_PARSE;
    case ErrorCode::kFormat: return ERN_ERR_FORMAT;
    case ErrorCode::kEmpty: return ERN_ERR_EMPTY;
    case ErrorCode::kDeterminism: return ERN_ERR_DETERMINISM;
    case ErrorCode::kIo: return ERN_ERR_IO;
  }
  return ERN_ERR_INTERNAL;
}

ern_status set_error(ern_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
ern_status guarded(F&& body) {
  try {
    body();
    return ERN_OK;
  } catch (const ernetcl::Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(ERN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(ERN_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(ERN_ERR_INTERNAL, "unknown error");
  }
}

#define ERN_REQUIRE(cond, what)                                          \
  do {                                                                   \
    if (!(cond)) return set_error(ERN_ERR_INVALID_ARGUMENT, what);       \
  } while (0)

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ern_epoch_info to_info(const ernetcl::EpochRecord& r) {
  return {r.epoch, r.train_loss, r.val_loss, r.val_weighted_f1, r.val_micro_f1, r.mean_weight, r.wall_seconds};
}

}  // namespace

extern "C" {

const char* ern_version(void) { return "1.0.0"; }

const char* ern_last_error(void) { return g_last_error.c_str(); }

const char* ern_status_name(ern_status status) {
  switch (status) {
    case ERN_OK: return "ok";
    case ERN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ERN_ERR_SHAPE: return "shape error";
    case ERN_ERR_RANK: return "rank error";
    case ERN_ERR_RANGE: return "range error";
    case ERN_ERR_CONFIG: return "config error";
    case ERN_ERR_LABEL: return "label error";
    case ERN_ERR_PARSE: return "parse error";
    case ERN_ERR_FORMAT: return "format error";
    case ERN_ERR_EMPTY: return "empty input";
    case ERN_ERR_DETERMINISM: return "determinism error";
    case ERN_ERR_IO: return "i/o error";
    case ERN_ERR_NOT_FOUND: return "not found";
    case ERN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ern_string_free(char* s) { std::free(s); }

// ---- configuration ---------------------------------------------------------

ern_status ern_config_new(ern_config** out) {
  ERN_REQUIRE(out, "out must not be null");
  return guarded([&] { *out = new ern_config{}; });
}

ern_status ern_config_preset(const char* name, ern_config** out) {
  ERN_REQUIRE(name && out, "name and out must not be null");
  return guarded([&] { *out = new ern_config{ernetcl::preset(name)}; });
}

ern_status ern_config_load(const char* path, ern_config** out) {
  ERN_REQUIRE(path && out, "path and out must not be null");
  return guarded([&] {
    auto cfg = ernetcl::load_config(path);
    ernetcl::apply_environment(cfg);
    *out = new ern_config{cfg};
  });
}

ern_status ern_config_set(ern_config* cfg, const char* key, const char* value) {
  ERN_REQUIRE(cfg && key && value, "cfg, key and value must not be null");
  return guarded([&] {
    ernetcl::ModelConfig next = cfg->value;
    ernetcl::set_config_value(next, key, value);
    ernetcl::validate(next, false);
    cfg->value = next;
  });
}

ern_status ern_config_format(const ern_config* cfg, char** out_text) {
  ERN_REQUIRE(cfg && out_text, "cfg and out_text must not be null");
  return guarded([&] { *out_text = copy_string(ernetcl::format_config(cfg->value)); });
}

void ern_config_free(ern_config* cfg) { delete cfg; }

// ---- datasets --------------------------------------------------------------

ern_status ern_dataset_load(const char* path, const char* labels_path, ern_dataset** out) {
  ERN_REQUIRE(path && out, "path and out must not be null");
  return guarded([&] {
    *out = new ern_dataset{ernetcl::data::load_dataset(path, labels_path ? labels_path : "")};
  });
}

ern_status ern_dataset_save(const ern_dataset* ds, const char* path) {
  ERN_REQUIRE(ds && path, "ds and path must not be null");
  return guarded([&] { ernetcl::data::save_dataset(ds->value, path); });
}

ern_status ern_dataset_synthesize(const char* spec_path, uint64_t seed, ern_dataset** out) {
  ERN_REQUIRE(spec_path && out, "spec_path and out must not be null");
  return guarded([&] {
    ernetcl::Rng rng(seed);
    *out = new ern_dataset{ernetcl::data::synthesize(ernetcl::data::load_synth_spec(spec_path), rng)};
  });
}

ern_status ern_dataset_synthesize_text(const char* spec_text, uint64_t seed, ern_dataset** out) {
  ERN_REQUIRE(spec_text && out, "spec_text and out must not be null");
  return guarded([&] {
    ernetcl::Rng rng(seed);
    *out = new ern_dataset{ernetcl::data::synthesize(ernetcl::data::parse_synth_spec(spec_text), rng)};
  });
}

size_t ern_dataset_conversation_count(const ern_dataset* ds) {
  return ds ? ds->value.conversations.size() : 0;
}

size_t ern_dataset_utterance_count(const ern_dataset* ds) { return ds ? ds->value.utterance_count() : 0; }

size_t ern_dataset_feature_dim(const ern_dataset* ds) { return ds ? ds->value.feature_dim() : 0; }

size_t ern_dataset_num_classes(const ern_dataset* ds) { return ds ? ds->value.num_classes() : 0; }

ern_status ern_dataset_conversation(const ern_dataset* ds, size_t index, const char** id, double* difficulty) {
  ERN_REQUIRE(ds, "ds must not be null");
  if (index >= ds->value.conversations.size()) {
    return set_error(ERN_ERR_RANGE, "conversation index " + std::to_string(index) + " out of range");
  }
  const auto& c = ds->value.conversations[index];
  if (id) *id = c.id.c_str();
  if (difficulty) *difficulty = c.difficulty;
  return ERN_OK;
}

void ern_dataset_free(ern_dataset* ds) { delete ds; }

// ---- training --------------------------------------------------------------

ern_status ern_train(const ern_config* cfg, const ern_dataset* train, const ern_dataset* val, unsigned flags,
                     ern_epoch_callback on_epoch, void* user, ern_model** out_model, ern_history** out_history) {
  ERN_REQUIRE(cfg && train && val && out_model, "cfg, train, val and out_model must not be null");
  return guarded([&] {
    ernetcl::TrainFlags f;
    f.no_te = (flags & ERN_TRAIN_NO_TE) != 0;
    f.no_se = (flags & ERN_TRAIN_NO_SE) != 0;
    f.no_cl = (flags & ERN_TRAIN_NO_CL) != 0;
    ernetcl::TrainHooks hooks;
    if (on_epoch) {
      hooks.on_epoch = [on_epoch, user](const ernetcl::EpochRecord& r) {
        const ern_epoch_info info = to_info(r);
        on_epoch(&info, user);
      };
    }
    auto result = ernetcl::train(cfg->value, train->value, val->value, f, hooks);
    auto* model = new ern_model{std::move(result.best)};
    if (out_history) {
      try {
        *out_history = new ern_history{std::move(result.history)};
      } catch (...) {
        delete model;
        throw;
      }
    }
    *out_model = model;
  });
}

size_t ern_history_epoch_count(const ern_history* h) { return h ? h->value.epochs.size() : 0; }

size_t ern_history_best_epoch(const ern_history* h) { return h ? h->value.best_epoch : 0; }

ern_status ern_history_epoch(const ern_history* h, size_t index, ern_epoch_info* out) {
  ERN_REQUIRE(h && out, "h and out must not be null");
  if (index >= h->value.epochs.size()) {
    return set_error(ERN_ERR_RANGE, "epoch index " + std::to_string(index) + " out of range");
  }
  *out = to_info(h->value.epochs[index]);
  return ERN_OK;
}

void ern_history_free(ern_history* h) { delete h; }

// ---- models ----------------------------------------------------------------

ern_status ern_model_save(const ern_model* model, const char* path) {
  ERN_REQUIRE(model && path, "model and path must not be null");
  return guarded([&] { ernetcl::save_checkpoint(model->value, path); });
}

ern_status ern_model_load(const char* path, ern_model** out) {
  ERN_REQUIRE(path && out, "path and out must not be null");
  return guarded([&] { *out = new ern_model{ernetcl::load_checkpoint(path)}; });
}

size_t ern_model_parameter_count(const ern_model* model) {
  return model ? model->value.params.parameter_count() : 0;
}

ern_status ern_model_config(const ern_model* model, char** out_text) {
  ERN_REQUIRE(model && out_text, "model and out_text must not be null");
  return guarded([&] { *out_text = copy_string(ernetcl::format_config(model->value.config)); });
}

void ern_model_free(ern_model* model) { delete model; }

// ---- evaluation ------------------------------------------------------------

ern_status ern_evaluate(const ern_model* model, const ern_dataset* ds, ern_report** out) {
  ERN_REQUIRE(model && ds && out, "model, ds and out must not be null");
  return guarded([&] { *out = new ern_report{ernetcl::evaluate(model->value, ds->value)}; });
}

ern_status ern_report_get(const ern_report* r, const char* key, double* out) {
  ERN_REQUIRE(r && key && out, "r, key and out must not be null");
  const std::string k = key;
  const auto& v = r->value;
  if (k == "accuracy") *out = v.accuracy;
  else if (k == "weighted_f1") *out = v.weighted_f1;
  else if (k == "micro_f1") *out = v.micro_f1;
  else if (k == "macro_f1") *out = v.macro_f1;
  else if (k == "micro_f1_excl_neutral" && v.micro_f1_excl_neutral) *out = *v.micro_f1_excl_neutral;
  else return set_error(ERN_ERR_NOT_FOUND, "report has no value '" + k + "'");
  return ERN_OK;
}

ern_status ern_report_format_text(const ern_report* r, ern_report_format format, char** out_text) {
  ERN_REQUIRE(r && out_text, "r and out_text must not be null");
  return guarded([&] {
    switch (format) {
      case ERN_REPORT_TABLE: *out_text = copy_string(ernetcl::metrics::format_table(r->value)); return;
      case ERN_REPORT_KEY_VALUES: *out_text = copy_string(ernetcl::metrics::format_key_values(r->value)); return;
    }
    throw ernetcl::Error(ernetcl::ErrorCode::kInvalidArgument, "unknown report format");
  });
}

void ern_report_free(ern_report* r) { delete r; }

ern_status ern_dump_features(const ern_model* model, const ern_dataset* ds, const char* path) {
  ERN_REQUIRE(model && ds && path, "model, ds and path must not be null");
  return guarded([&] { ernetcl::dump_features(model->value, ds->value, path); });
}

}  // extern "C"
