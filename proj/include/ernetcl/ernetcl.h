/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the ernetcl training and evaluation library.
 *
 * Every object is an opaque handle owned by the caller and released with its
 * matching *_free function. Functions that can fail return an ern_status;
 * on failure ern_last_error() describes the problem (per thread, valid until
 * the next failing call on that thread). Strings returned through char**
 * are released with ern_string_free.
 */
#ifndef ERNETCL_ERNETCL_H_
#define ERNETCL_ERNETCL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ERNETCL_BUILDING)
#    define ERNETCL_API __declspec(dllexport)
#  else
#    define ERNETCL_API __declspec(dllimport)
#  endif
#else
#  define ERNETCL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ern_status {
  ERN_OK = 0,
  ERN_ERR_INVALID_ARGUMENT = 1,
  ERN_ERR_SHAPE = 2,
  ERN_ERR_RANK = 3,
  ERN_ERR_RANGE = 4,
  ERN_ERR_CONFIG = 5,
  ERN_ERR_LABEL = 6,
  ERN_ERR_PARSE = 7,
  ERN_ERR_FORMAT = 8,
  ERN_ERR_EMPTY = 9,
  ERN_ERR_DETERMINISM = 10,
  ERN_ERR_IO = 11,
  ERN_ERR_NOT_FOUND = 12,
  ERN_ERR_INTERNAL = 13
} ern_status;

typedef struct ern_config ern_config;
typedef struct ern_dataset ern_dataset;
typedef struct ern_model ern_model;
typedef struct ern_history ern_history;
typedef struct ern_report ern_report;

ERNETCL_API const char* ern_version(void);
ERNETCL_API const char* ern_last_error(void);
ERNETCL_API const char* ern_status_name(ern_status status);
ERNETCL_API void ern_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

ERNETCL_API ern_status ern_config_new(ern_config** out);
/* meld, iemocap, emorynlp, dailydialog */
ERNETCL_API ern_status ern_config_preset(const char* name, ern_config** out);
/* Flat `key = value` file; ERNETCL_SEED, when set, overrides `seed`. */
ERNETCL_API ern_status ern_config_load(const char* path, ern_config** out);
ERNETCL_API ern_status ern_config_set(ern_config* cfg, const char* key, const char* value);
ERNETCL_API ern_status ern_config_format(const ern_config* cfg, char** out_text);
ERNETCL_API void ern_config_free(ern_config* cfg);

/* ---- datasets --------------------------------------------------------- */

/* labels_path may be NULL: `<path>.labels` is used when it exists. */
ERNETCL_API ern_status ern_dataset_load(const char* path, const char* labels_path, ern_dataset** out);
ERNETCL_API ern_status ern_dataset_save(const ern_dataset* ds, const char* path);
ERNETCL_API ern_status ern_dataset_synthesize(const char* spec_path, uint64_t seed, ern_dataset** out);
ERNETCL_API ern_status ern_dataset_synthesize_text(const char* spec_text, uint64_t seed, ern_dataset** out);
ERNETCL_API size_t ern_dataset_conversation_count(const ern_dataset* ds);
ERNETCL_API size_t ern_dataset_utterance_count(const ern_dataset* ds);
ERNETCL_API size_t ern_dataset_feature_dim(const ern_dataset* ds);
ERNETCL_API size_t ern_dataset_num_classes(const ern_dataset* ds);
/* id stays valid for the lifetime of ds. */
ERNETCL_API ern_status ern_dataset_conversation(const ern_dataset* ds, size_t index, const char** id,
                                                double* difficulty);
ERNETCL_API void ern_dataset_free(ern_dataset* ds);

/* ---- training --------------------------------------------------------- */

enum {
  ERN_TRAIN_NO_TE = 1u << 0,
  ERN_TRAIN_NO_SE = 1u << 1,
  ERN_TRAIN_NO_CL = 1u << 2
};

typedef struct ern_epoch_info {
  size_t epoch;
  double train_loss;
  double val_loss;
  double val_weighted_f1;
  double val_micro_f1;
  double mean_weight;
  double wall_seconds;
} ern_epoch_info;

typedef void (*ern_epoch_callback)(const ern_epoch_info* info, void* user);

/* on_epoch may be NULL. out_history may be NULL. */
ERNETCL_API ern_status ern_train(const ern_config* cfg, const ern_dataset* train, const ern_dataset* val,
                                 unsigned flags, ern_epoch_callback on_epoch, void* user,
                                 ern_model** out_model, ern_history** out_history);

ERNETCL_API size_t ern_history_epoch_count(const ern_history* h);
ERNETCL_API size_t ern_history_best_epoch(const ern_history* h);
ERNETCL_API ern_status ern_history_epoch(const ern_history* h, size_t index, ern_epoch_info* out);
ERNETCL_API void ern_history_free(ern_history* h);

/* ---- models ----------------------------------------------------------- */

ERNETCL_API ern_status ern_model_save(const ern_model* model, const char* path);
ERNETCL_API ern_status ern_model_load(const char* path, ern_model** out);
ERNETCL_API size_t ern_model_parameter_count(const ern_model* model);
ERNETCL_API ern_status ern_model_config(const ern_model* model, char** out_text);
ERNETCL_API void ern_model_free(ern_model* model);

/* ---- evaluation ------------------------------------------------------- */

typedef enum ern_report_format {
  ERN_REPORT_TABLE = 0,
  ERN_REPORT_KEY_VALUES = 1
} ern_report_format;

ERNETCL_API ern_status ern_evaluate(const ern_model* model, const ern_dataset* ds, ern_report** out);
/* Keys: accuracy, weighted_f1, micro_f1, macro_f1, micro_f1_excl_neutral.
 * The last one yields ERN_ERR_NOT_FOUND when no neutral class is declared. */
ERNETCL_API ern_status ern_report_get(const ern_report* r, const char* key, double* out);
ERNETCL_API ern_status ern_report_format_text(const ern_report* r, ern_report_format format, char** out_text);
ERNETCL_API void ern_report_free(ern_report* r);

/* One line per utterance: <conv_id>\t<index>\t<label>\t<v1,...,vd> */
ERNETCL_API ern_status ern_dump_features(const ern_model* model, const ern_dataset* ds, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* ERNETCL_ERNETCL_H_ */
