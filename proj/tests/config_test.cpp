/*
 * Copyright 2026 The mtransfer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mtransfer/config.hpp"

#include <filesystem>

#include "gtest/gtest.h"
#include "mtransfer/synthetic.hpp"

namespace mtransfer {
namespace {

std::string FieldOf(const nlohmann::json& j) {
  try {
    config_from_json(j, "c.json");
  } catch (const SchemaError& e) {
    return e.field();
  }
  ADD_FAILURE() << "no schema error";
  return {};
}

TEST(Config, DefaultsRoundTrip) {
  Config c;
  c.net.widths = {1, 2, 3, 4, 5, 6};
  c.net.pretrain_learning_rate = 0.125;
  c.dtw.gamma = 2.5;
  c.eval.similarity.language = 0.25;
  c.labels.seed = 9;
  c.encoding.target_len = 20;
  const auto j = to_json(c);
  const auto back = config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.net, c.net);
  EXPECT_EQ(back.encoding.target_len, 20u);
}

TEST(Config, MissingKeysKeepDefaults) {
  const auto c = config_from_json(nlohmann::json::parse(R"({"net": {"epochs_finetune": 7}})"));
  EXPECT_EQ(c.net.epochs_finetune, 7u);
  EXPECT_EQ(c.net.epochs_pretrain, NetConfig{}.epochs_pretrain);
  EXPECT_EQ(c.dtw.alpha_t, DtwParams{}.alpha_t);
  EXPECT_EQ(c.eval.folds, kDefaultFolds);
}

TEST(Config, UnknownKeysAndWrongTypesNameTheField) {
  EXPECT_EQ(FieldOf(nlohmann::json::parse(R"({"nett": {}})")), "nett");
  EXPECT_EQ(FieldOf(nlohmann::json::parse(R"({"net": {"widths": {"h9": 1}}})")), "net.widths.h9");
  EXPECT_EQ(FieldOf(nlohmann::json::parse(R"({"dtw": {"beta": "one"}})")), "dtw.beta");
  EXPECT_EQ(FieldOf(nlohmann::json::parse(R"({"eval": {"similarity": {"icp": 1}}})")), "eval.similarity.icp");
  EXPECT_EQ(FieldOf(nlohmann::json::parse(R"({"version": 3})")), "version");
  EXPECT_EQ(FieldOf(nlohmann::json::parse(R"({"features": {"target_len": 0}})")), "features");
  EXPECT_EQ(FieldOf(nlohmann::json::parse(R"({"net": []})")), "net");
}

TEST(Config, SemanticValidation) {
  try {
    config_from_json(nlohmann::json::parse(R"({"thresholds": {"t_g": 9, "t_w": 3}})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_thresholds);
  }
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dtw": {"alpha_t": 0}})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"net": {"dropout_rate": 1.0}})")), Error);
}

TEST(Config, TrainSettingsCarryEverything) {
  Config c;
  c.thresholds = {3, 9};
  c.net.rng_seed = 77;
  const auto s = c.train_settings(false);
  EXPECT_FALSE(s.noise_handling);
  EXPECT_EQ(s.thresholds.t_w, 9.0);
  EXPECT_EQ(s.net.rng_seed, 77u);
}

TEST(Config, LoadFromFile) {
  const auto path = (std::filesystem::temp_directory_path() / "mtransfer_config_test.json").string();
  write_json_file(path, nlohmann::json::parse(R"({"version": 1, "eval": {"threshold": 12.5}})"));
  EXPECT_EQ(load_config(path).eval.threshold, 12.5);
  std::filesystem::remove(path);
}

TEST(RunEvaluation, BaselineRowsInRequestedOrder) {
  SyntheticSpec spec;
  spec.n_tasks = 15;
  spec.demos_per_task = 4;
  const auto d = generate_synthetic(spec);
  Config c;
  c.eval.folds = 3;
  const auto r = run_evaluation(d.tasks, c, {"similarity+weighted", "chance"});
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].model, "similarity+weighted");
  EXPECT_EQ(r.rows[1].model, "chance");
  EXPECT_EQ(r.rows[0].evaluated, 15u);
  EXPECT_EQ(to_json(run_evaluation(d.tasks, c, {"chance"})).dump(), to_json(run_evaluation(d.tasks, c, {"chance"})).dump());
  EXPECT_THROW(run_evaluation(d.tasks, c, {"oracle"}), Error);
}

}  // namespace
}  // namespace mtransfer
