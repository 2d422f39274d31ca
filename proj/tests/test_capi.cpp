// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <string>

#include "ernetcl/ernetcl.h"
#include "temp_dir.hpp"

namespace {

const char* kSpec =
    "num_conversations = 10\n"
    "num_classes = 3\n"
    "feature_dim = 8\n"
    "len_min = 2\n"
    "len_max = 4\n"
    "neutral_index = 0\n";

struct Handles {
  ern_config* cfg = nullptr;
  ern_dataset* train = nullptr;
  ern_dataset* val = nullptr;
  ~Handles() {
    ern_config_free(cfg);
    ern_dataset_free(train);
    ern_dataset_free(val);
  }
};

void setup(Handles& h) {
  ASSERT_EQ(ern_config_new(&h.cfg), ERN_OK);
  ASSERT_EQ(ern_config_set(h.cfg, "heads", "2"), ERN_OK);
  ASSERT_EQ(ern_config_set(h.cfg, "depth_te", "1"), ERN_OK);
  ASSERT_EQ(ern_config_set(h.cfg, "depth_se", "1"), ERN_OK);
  ASSERT_EQ(ern_config_set(h.cfg, "max_epochs", "2"), ERN_OK);
  ASSERT_EQ(ern_config_set(h.cfg, "batch_size", "4"), ERN_OK);
  ASSERT_EQ(ern_dataset_synthesize_text(kSpec, 1, &h.train), ERN_OK);
  ASSERT_EQ(ern_dataset_synthesize_text(kSpec, 2, &h.val), ERN_OK);
}

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(ern_status_name(ERN_OK), "ok");
  EXPECT_NE(std::strlen(ern_status_name(ERN_ERR_SHAPE)), 0u);
  EXPECT_STREQ(ern_version(), "1.0.0");
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(ern_config_new(nullptr), ERN_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::strlen(ern_last_error()), 0u);
  ern_dataset* ds = nullptr;
  EXPECT_EQ(ern_dataset_load(nullptr, nullptr, &ds), ERN_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ds, nullptr);
  ern_config_free(nullptr);
  ern_dataset_free(nullptr);
  ern_model_free(nullptr);
  ern_report_free(nullptr);
  ern_history_free(nullptr);
  ern_string_free(nullptr);
}

TEST(CApi, ErrorsCarryCodesAndMessages) {
  ern_config* cfg = nullptr;
  EXPECT_EQ(ern_config_preset("nope", &cfg), ERN_ERR_CONFIG);
  EXPECT_EQ(ern_config_preset("meld", &cfg), ERN_OK);
  EXPECT_EQ(ern_config_set(cfg, "sigma", "abc"), ERN_ERR_CONFIG);
  EXPECT_NE(std::string(ern_last_error()).find("sigma"), std::string::npos);
  char* text = nullptr;
  ASSERT_EQ(ern_config_format(cfg, &text), ERN_OK);
  EXPECT_NE(std::string(text).find("sigma = 0.4"), std::string::npos);
  ern_string_free(text);
  ern_config_free(cfg);
  ern_dataset* ds = nullptr;
  EXPECT_EQ(ern_dataset_load("/nonexistent/ernetcl.jsonl", nullptr, &ds), ERN_ERR_IO);
}

TEST(CApi, DatasetAccessors) {
  Handles h;
  setup(h);
  EXPECT_EQ(ern_dataset_conversation_count(h.train), 10u);
  EXPECT_EQ(ern_dataset_feature_dim(h.train), 8u);
  EXPECT_EQ(ern_dataset_num_classes(h.train), 3u);
  const char* id = nullptr;
  double d = -1;
  ASSERT_EQ(ern_dataset_conversation(h.train, 3, &id, &d), ERN_OK);
  EXPECT_STREQ(id, "synth-00003");
  EXPECT_GE(d, 0.0);
  EXPECT_LE(d, 1.0);
  EXPECT_EQ(ern_dataset_conversation(h.train, 10, &id, &d), ERN_ERR_RANGE);
}

struct Seen {
  int epochs = 0;
};

void count_epoch(const ern_epoch_info* info, void* user) {
  auto* s = static_cast<Seen*>(user);
  ++s->epochs;
  EXPECT_EQ(info->epoch, static_cast<size_t>(s->epochs));
}

TEST(CApi, TrainSaveLoadEvaluate) {
  ernetcl::testing::TempDir dir;
  Handles h;
  setup(h);
  Seen seen;
  ern_model* model = nullptr;
  ern_history* hist = nullptr;
  ASSERT_EQ(ern_train(h.cfg, h.train, h.val, ERN_TRAIN_NO_CL, count_epoch, &seen, &model, &hist), ERN_OK)
      << ern_last_error();
  EXPECT_EQ(seen.epochs, 2);
  EXPECT_EQ(ern_history_epoch_count(hist), 2u);
  ern_epoch_info info{};
  ASSERT_EQ(ern_history_epoch(hist, 1, &info), ERN_OK);
  EXPECT_EQ(info.epoch, 2u);
  EXPECT_EQ(info.mean_weight, 1.0);
  EXPECT_EQ(ern_history_epoch(hist, 2, &info), ERN_ERR_RANGE);

  const std::string path = dir.file("m.ckpt");
  ASSERT_EQ(ern_model_save(model, path.c_str()), ERN_OK);
  ern_model* loaded = nullptr;
  ASSERT_EQ(ern_model_load(path.c_str(), &loaded), ERN_OK);
  EXPECT_EQ(ern_model_parameter_count(loaded), ern_model_parameter_count(model));

  ern_report* a = nullptr;
  ern_report* b = nullptr;
  ASSERT_EQ(ern_evaluate(model, h.val, &a), ERN_OK);
  ASSERT_EQ(ern_evaluate(loaded, h.val, &b), ERN_OK);
  for (const char* key : {"accuracy", "weighted_f1", "micro_f1", "macro_f1", "micro_f1_excl_neutral"}) {
    double x = -1, y = -2;
    ASSERT_EQ(ern_report_get(a, key, &x), ERN_OK) << key;
    ASSERT_EQ(ern_report_get(b, key, &y), ERN_OK) << key;
    EXPECT_EQ(x, y) << key;
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  double x = 0;
  EXPECT_EQ(ern_report_get(a, "bogus", &x), ERN_ERR_NOT_FOUND);
  char* table = nullptr;
  ASSERT_EQ(ern_report_format_text(a, ERN_REPORT_TABLE, &table), ERN_OK);
  EXPECT_NE(std::string(table).find("class1"), std::string::npos);
  ern_string_free(table);

  ASSERT_EQ(ern_dump_features(model, h.val, dir.file("f.tsv").c_str()), ERN_OK);

  ern_report_free(a);
  ern_report_free(b);
  ern_model_free(loaded);
  ern_model_free(model);
  ern_history_free(hist);
}

TEST(CApi, MismatchedDatasetsFailCleanly) {
  Handles h;
  setup(h);
  ern_dataset* other = nullptr;
  ASSERT_EQ(ern_dataset_synthesize_text("feature_dim = 6\nnum_classes = 3\n", 3, &other), ERN_OK);
  ern_model* model = nullptr;
  EXPECT_EQ(ern_train(h.cfg, h.train, other, 0, nullptr, nullptr, &model, nullptr), ERN_ERR_CONFIG);
  EXPECT_EQ(model, nullptr);
  ern_dataset_free(other);
}

}  // namespace
