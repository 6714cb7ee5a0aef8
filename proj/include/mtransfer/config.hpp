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

#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtransfer/crowd_labels.hpp"
#include "mtransfer/dtw.hpp"
#include "mtransfer/error.hpp"
#include "mtransfer/eval.hpp"
#include "mtransfer/features.hpp"
#include "mtransfer/model.hpp"
#include "mtransfer/net.hpp"
#include "mtransfer/trajectory_io.hpp"

namespace mtransfer {

inline constexpr int kConfigVersion = 1;

struct EvalSettings {
  double threshold = 10.0;
  int folds = kDefaultFolds;
  std::uint64_t fold_seed = 0;
  std::uint64_t baseline_seed = 0;
  SimilarityWeights similarity;
};

/// Everything a CLI run can be configured with.
struct Config {
  DtwParams dtw;
  NoiseThresholds thresholds;
  LabelOptions labels;
  NetConfig net;
  TrajectoryEncoding encoding;
  EvalSettings eval;

  TrainSettings train_settings(bool noise_handling = true) const {
    TrainSettings s;
    s.net = net;
    s.dtw = dtw;
    s.thresholds = thresholds;
    s.labels = labels;
    s.encoding = encoding;
    s.noise_handling = noise_handling;
    return s;
  }
};

namespace detail {

// Copies known keys from `j` into fields, rejecting unknown ones.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string file, std::string path)
      : j_(j), file_(std::move(file)), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(file_, path_, "expected object");
  }

  template <typename T>
  Reader& get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw SchemaError(file_, field(key), "wrong type");
    }
    return *this;
  }

  Reader child(const char* key) const {
    return Reader(j_.contains(key) ? j_.at(key) : empty(), file_, field(key));
  }
  bool has(const char* key) const { return j_.contains(key); }
  Reader& expect(const char* key) {
    seen_.insert(key);
    return *this;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw SchemaError(file_, field(k.c_str()), "unknown key");
    }
  }

 private:
  static const nlohmann::json& empty() {
    static const nlohmann::json e = nlohmann::json::object();
    return e;
  }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const nlohmann::json& j_;
  std::string file_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline nlohmann::json to_json(const DtwParams& p) {
  return {{"alpha_t", p.alpha_t}, {"alpha_r", p.alpha_r}, {"beta", p.beta}, {"gamma", p.gamma},
          {"literal_gripper_indicator", p.literal_gripper_indicator}};
}

inline nlohmann::json to_json(const NetConfig& c) {
  const auto& w = c.widths;
  return {{"widths",
           {{"h1_pc", w.h1_pc}, {"h1_lang", w.h1_lang}, {"h1_traj", w.h1_traj},
            {"h2_pt", w.h2_pt}, {"h2_lt", w.h2_lt}, {"h3", w.h3}}},
          {"multimodal", c.multimodal},
          {"corruption_p", c.corruption_p},
          {"sparsity_lambda", c.sparsity_lambda},
          {"maxnorm_c", c.maxnorm_c},
          {"dropout_rate", c.dropout_rate},
          {"learning_rate", c.learning_rate},
          {"pretrain_learning_rate", c.pretrain_learning_rate},
          {"lr_decay", c.lr_decay},
          {"batch_size", c.batch_size},
          {"epochs_pretrain", c.epochs_pretrain},
          {"epochs_finetune", c.epochs_finetune},
          {"rng_seed", c.rng_seed}};
}

inline nlohmann::json to_json(const TrajectoryEncoding& e) {
  return {{"target_len", e.target_len}, {"samples_per_segment", e.samples_per_segment}};
}

inline nlohmann::json to_json(const Config& c) {
  return {{"version", kConfigVersion},
          {"dtw", to_json(c.dtw)},
          {"thresholds", {{"t_g", c.thresholds.t_g}, {"t_w", c.thresholds.t_w}}},
          {"labels", {{"max_negative_ratio", c.labels.max_negative_ratio}, {"seed", c.labels.seed}}},
          {"net", to_json(c.net)},
          {"features", to_json(c.encoding)},
          {"eval",
           {{"threshold", c.eval.threshold},
            {"folds", c.eval.folds},
            {"fold_seed", c.eval.fold_seed},
            {"baseline_seed", c.eval.baseline_seed},
            {"similarity",
             {{"point_cloud", c.eval.similarity.point_cloud}, {"language", c.eval.similarity.language}}}}}};
}

inline void read_dtw(detail::Reader r, DtwParams& p) {
  r.get("alpha_t", p.alpha_t).get("alpha_r", p.alpha_r).get("beta", p.beta).get("gamma", p.gamma)
      .get("literal_gripper_indicator", p.literal_gripper_indicator).finish();
}

inline void read_net(detail::Reader r, NetConfig& c) {
  auto w = r.child("widths");
  w.get("h1_pc", c.widths.h1_pc).get("h1_lang", c.widths.h1_lang).get("h1_traj", c.widths.h1_traj)
      .get("h2_pt", c.widths.h2_pt).get("h2_lt", c.widths.h2_lt).get("h3", c.widths.h3).finish();
  r.expect("widths")
      .get("multimodal", c.multimodal)
      .get("corruption_p", c.corruption_p)
      .get("sparsity_lambda", c.sparsity_lambda)
      .get("maxnorm_c", c.maxnorm_c)
      .get("dropout_rate", c.dropout_rate)
      .get("learning_rate", c.learning_rate)
      .get("pretrain_learning_rate", c.pretrain_learning_rate)
      .get("lr_decay", c.lr_decay)
      .get("batch_size", c.batch_size)
      .get("epochs_pretrain", c.epochs_pretrain)
      .get("epochs_finetune", c.epochs_finetune)
      .get("rng_seed", c.rng_seed)
      .finish();
}

inline void read_encoding(detail::Reader r, TrajectoryEncoding& e) {
  r.get("target_len", e.target_len).get("samples_per_segment", e.samples_per_segment).finish();
}

/// Parses a config document; missing keys keep their defaults, unknown
/// keys are rejected.
inline Config config_from_json(const nlohmann::json& j, const std::string& file = {}) {
  Config c;
  detail::Reader r(j, file, "");
  int version = kConfigVersion;
  r.get("version", version);
  if (version != kConfigVersion) throw SchemaError(file, "version", "unsupported config version");
  read_dtw(r.child("dtw"), c.dtw);
  {
    auto t = r.child("thresholds");
    t.get("t_g", c.thresholds.t_g).get("t_w", c.thresholds.t_w).finish();
  }
  {
    auto l = r.child("labels");
    l.get("max_negative_ratio", c.labels.max_negative_ratio).get("seed", c.labels.seed).finish();
  }
  read_net(r.child("net"), c.net);
  read_encoding(r.child("features"), c.encoding);
  {
    auto e = r.child("eval");
    auto s = e.child("similarity");
    s.get("point_cloud", c.eval.similarity.point_cloud).get("language", c.eval.similarity.language).finish();
    e.expect("similarity")
        .get("threshold", c.eval.threshold)
        .get("folds", c.eval.folds)
        .get("fold_seed", c.eval.fold_seed)
        .get("baseline_seed", c.eval.baseline_seed)
        .finish();
  }
  r.expect("dtw").expect("thresholds").expect("labels").expect("net").expect("features").expect("eval").finish();
  c.dtw.validate();
  c.thresholds.validate();
  c.net.validate();
  if (c.encoding.target_len == 0 || c.encoding.samples_per_segment == 0) {
    throw SchemaError(file, "features", "target_len and samples_per_segment must be positive");
  }
  return c;
}

inline Config load_config(const std::string& path) { return config_from_json(read_json_file(path), path); }

/// Row names accepted by run_evaluation, in report order.
inline const std::vector<std::string>& evaluation_models() {
  static const std::vector<std::string> names = {"chance", "similarity+random", "similarity+weighted",
                                                 "model", "model-no-noise-handling", "model-unimodal"};
  return names;
}

/// Cross-validates the named rows on one fold split derived from the config.
inline EvalReport run_evaluation(const std::vector<TaskInstance>& tasks, const Config& c,
                                 const std::vector<std::string>& models,
                                 const std::function<void(const std::string&)>& progress = {}) {
  const FoldSplit split = make_folds(tasks, c.eval.fold_seed, c.eval.folds);
  EvalReport report;
  report.threshold = c.eval.threshold;
  for (const auto& name : models) {
    if (progress) progress(name);
    ModelFactory factory;
    if (name == "chance") {
      factory = baseline_chance(c.eval.baseline_seed);
    } else if (name == "similarity+random") {
      factory = baseline_task_similarity(DemoWeighting::random, c.dtw, c.eval.baseline_seed, c.eval.similarity);
    } else if (name == "similarity+weighted") {
      factory = baseline_task_similarity(DemoWeighting::weighted, c.dtw, c.eval.baseline_seed, c.eval.similarity);
    } else if (name == "model") {
      factory = network_model(c.train_settings(true));
    } else if (name == "model-no-noise-handling") {
      factory = network_model(c.train_settings(false));
    } else if (name == "model-unimodal") {
      auto s = c.train_settings(true);
      s.net.multimodal = false;
      factory = network_model(s);
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown evaluation model '" + name + "'");
    }
    report.rows.push_back(evaluate(name, factory, tasks, split, c.dtw, c.eval.threshold));
  }
  return report;
}

}  // namespace mtransfer
