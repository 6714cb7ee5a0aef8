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

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtransfer/crowd_labels.hpp"
#include "mtransfer/dtw.hpp"
#include "mtransfer/features.hpp"
#include "mtransfer/net.hpp"
#include "mtransfer/task.hpp"

namespace mtransfer {

/// A trained network together with the featurization it was trained on.
struct TransferModel {
  MultimodalNet net;
  Vocabulary vocab;
  TrajectoryEncoding encoding;
};

struct RankedCandidate {
  std::size_t index = 0;  // position in the candidate list
  std::string id;
  double score = 0.0;
};

/// Candidate trajectory features stacked as columns, in candidate order.
inline Eigen::MatrixXd embed_candidates(const std::vector<Trajectory>& candidates,
                                        const TrajectoryEncoding& enc) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(enc.feature_size()),
                      static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = embed_part_trajectory(candidates[i], enc);
  }
  return out;
}

/// Scores precomputed candidate features against one (part, instruction)
/// and sorts by descending probability, ties by id.
inline std::vector<RankedCandidate> rank_features(const MultimodalNet& net,
                                                  const Eigen::VectorXd& pc,
                                                  const Eigen::VectorXd& lang,
                                                  const Eigen::MatrixXd& candidate_features,
                                                  const std::vector<std::string>& ids) {
  const Eigen::Index n = candidate_features.cols();
  if (n == 0) throw Error(ErrorCode::empty_pool, "no candidate trajectories to rank");
  FeatureBatch batch{pc.replicate(1, n), lang.replicate(1, n), candidate_features};
  const Eigen::VectorXd scores = net.forward_batch(batch);
  std::vector<RankedCandidate> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = {k, ids[k], scores(i)};
  }
  std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

/// Ranks part-frame candidate trajectories for a part and an instruction.
inline std::vector<RankedCandidate> infer(const TransferModel& model, const PointCloudPart& part,
                                          const PartFrame& frame, const std::string& instruction,
                                          const std::vector<Trajectory>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::empty_pool, "no candidate trajectories to rank");
  std::vector<std::string> ids;
  ids.reserve(candidates.size());
  for (const auto& c : candidates) ids.push_back(c.id);
  return rank_features(model.net, point_cloud_features(part, frame),
                       to_vector(embed_language(instruction, model.vocab)),
                       embed_candidates(candidates, model.encoding), ids);
}

struct TrainSettings {
  NetConfig net;
  DtwParams dtw;
  NoiseThresholds thresholds;
  LabelOptions labels;
  TrajectoryEncoding encoding;
  bool noise_handling = true;
  std::set<std::string> stop_words = default_stop_words();
};

struct TrainResult {
  TransferModel model;
  std::vector<LabeledExample> examples;
  TrainingReport pretrain_report;
  TrainingReport finetune_report;
};

/// Builds labeled feature batches for `examples` over `tasks`' demos.
struct ExampleFeatures {
  FeatureBatch batch;
  Eigen::VectorXd labels;
};

inline ExampleFeatures featurize_examples(const std::vector<TaskInstance>& tasks,
                                          const std::vector<Trajectory>& pool,
                                          const std::vector<LabeledExample>& examples,
                                          const Vocabulary& vocab, const TrajectoryEncoding& enc) {
  std::map<std::string, const TaskInstance*> task_by_id;
  for (const auto& t : tasks) task_by_id.emplace(t.id, &t);
  std::map<std::string, const Trajectory*> traj_by_id;
  for (const auto& t : pool) traj_by_id.emplace(t.id, &t);
  for (const auto& t : tasks) {
    for (const auto& d : t.demos) traj_by_id.emplace(d.id, &d);
  }

  std::map<std::string, std::pair<Eigen::VectorXd, Eigen::VectorXd>> task_cache;
  std::map<std::string, Eigen::VectorXd> traj_cache;
  const auto n = static_cast<Eigen::Index>(examples.size());
  ExampleFeatures out;
  out.batch.pc.resize(static_cast<Eigen::Index>(kPointCloudFeatureSize), n);
  out.batch.lang.resize(static_cast<Eigen::Index>(vocab.size()), n);
  out.batch.traj.resize(static_cast<Eigen::Index>(enc.feature_size()), n);
  out.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    const auto tit = task_by_id.find(ex.task);
    const auto jit = traj_by_id.find(ex.traj);
    if (tit == task_by_id.end() || jit == traj_by_id.end()) {
      throw Error(ErrorCode::referential_integrity,
                  "example references unknown task/trajectory " + ex.task + "/" + ex.traj);
    }
    auto cached = task_cache.find(ex.task);
    if (cached == task_cache.end()) {
      const TaskInstance& t = *tit->second;
      cached = task_cache
                   .emplace(ex.task, std::make_pair(point_cloud_features(*t.part, t.frame),
                                                    to_vector(embed_language(t.instruction, vocab))))
                   .first;
    }
    auto tc = traj_cache.find(ex.traj);
    if (tc == traj_cache.end()) {
      tc = traj_cache.emplace(ex.traj, embed_part_trajectory(*jit->second, enc)).first;
    }
    out.batch.pc.col(i) = cached->second.first;
    out.batch.lang.col(i) = cached->second.second;
    out.batch.traj.col(i) = tc->second;
    out.labels(i) = ex.label;
  }
  return out;
}

/// Full training pipeline on a set of training tasks: vocabulary, labels
/// (noise-handled or trusted), SSDA pretraining, fine-tuning.
inline TrainResult train_transfer_model(const std::vector<TaskInstance>& tasks,
                                        const TrainSettings& settings,
                                        const UpdateHook& hook = {}) {
  if (tasks.empty()) throw Error(ErrorCode::empty_dataset, "no training tasks");
  std::vector<std::string> corpus;
  for (const auto& t : tasks) corpus.push_back(t.instruction);
  TrainResult result;
  result.model.vocab = Vocabulary::build(corpus, settings.stop_words);
  result.model.encoding = settings.encoding;

  const auto pool = demo_pool(tasks);
  result.examples = settings.noise_handling
                        ? generate_examples(tasks, pool, settings.thresholds, settings.dtw,
                                            settings.labels)
                        : trust_all_examples(tasks, settings.labels);
  const auto feats = featurize_examples(tasks, pool, result.examples, result.model.vocab,
                                        settings.encoding);
  const InputDims dims{kPointCloudFeatureSize, result.model.vocab.size(),
                       settings.encoding.feature_size()};
  MultimodalNet net = pretrain(feats.batch, dims, settings.net, &result.pretrain_report, hook);
  result.model.net =
      finetune(std::move(net), feats.batch, feats.labels, settings.net, &result.finetune_report, hook);
  return result;
}

}  // namespace mtransfer
