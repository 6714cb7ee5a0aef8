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
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtransfer/crowd_labels.hpp"
#include "mtransfer/dtw.hpp"
#include "mtransfer/features.hpp"
#include "mtransfer/model.hpp"
#include "mtransfer/task.hpp"

namespace mtransfer {

inline constexpr int kDefaultFolds = 5;

/// Manual-level fold assignment: all instructions of a manual share a fold.
struct FoldSplit {
  int folds = kDefaultFolds;
  std::map<std::string, int> fold_of_task;

  int fold_of(const std::string& task_id) const {
    const auto it = fold_of_task.find(task_id);
    if (it == fold_of_task.end()) throw Error(ErrorCode::not_found, "task '" + task_id + "' has no fold");
    return it->second;
  }
};

inline FoldSplit make_folds(const std::vector<TaskInstance>& tasks, std::uint64_t seed,
                            int folds = kDefaultFolds) {
  std::set<std::string> manual_set;
  for (const auto& t : tasks) manual_set.insert(t.manual_id);
  if (folds < 2 || manual_set.size() < static_cast<std::size_t>(folds)) {
    throw Error(ErrorCode::too_few_manuals, "need at least " + std::to_string(folds) +
                                                " manuals, got " + std::to_string(manual_set.size()));
  }
  std::vector<std::string> manuals(manual_set.begin(), manual_set.end());
  std::mt19937_64 rng(seed);
  std::shuffle(manuals.begin(), manuals.end(), rng);
  std::map<std::string, int> fold_of_manual;
  for (std::size_t i = 0; i < manuals.size(); ++i) {
    fold_of_manual[manuals[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  FoldSplit split;
  split.folds = folds;
  for (const auto& t : tasks) split.fold_of_task[t.id] = fold_of_manual.at(t.manual_id);
  return split;
}

/// Training side of one fold.
struct FoldContext {
  int fold = 0;
  std::vector<TaskInstance> train;
  std::vector<Trajectory> pool;  // crowd demos of the training tasks
};

/// Returns the index (into the fold's pool) of the trajectory to transfer.
using Ranker = std::function<std::size_t(const TaskInstance&)>;
using ModelFactory = std::function<Ranker(const FoldContext&)>;

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population std of the per-fold values
};

struct TaskScore {
  std::string task;
  std::string manual;
  int fold = 0;
  std::string predicted;
  double dtw = 0.0;
};

struct ModelRow {
  std::string model;
  MeanStd per_manual;
  MeanStd per_instruction;
  MeanStd accuracy;  // percent
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // test tasks without an expert demo
  std::vector<TaskScore> scores;
};

struct EvalReport {
  double threshold = 10.0;
  std::vector<ModelRow> rows;
};

namespace detail {

struct Aggregate {
  double per_instruction = 0.0;
  double per_manual = 0.0;
  double accuracy = 0.0;
};

inline Aggregate aggregate(const std::vector<TaskScore>& scores, double threshold) {
  Aggregate a;
  if (scores.empty()) return a;
  std::map<std::string, std::pair<double, std::size_t>> manuals;
  std::size_t good = 0;
  for (const auto& s : scores) {
    auto& m = manuals[s.manual];
    m.first += s.dtw;
    ++m.second;
    if (s.dtw < threshold) ++good;
  }
  // Both means sum in manual order, so they agree exactly when every
  // manual holds one instruction.
  for (const auto& [id, m] : manuals) {
    a.per_instruction += m.first;
    a.per_manual += m.first / static_cast<double>(m.second);
  }
  a.per_instruction /= static_cast<double>(scores.size());
  a.per_manual /= static_cast<double>(manuals.size());
  a.accuracy = 100.0 * static_cast<double>(good) / static_cast<double>(scores.size());
  return a;
}

inline double population_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace detail

/// Recomputes a row's summary from its task scores at `threshold`.
inline void summarize(ModelRow& row, double threshold, int folds) {
  const auto all = detail::aggregate(row.scores, threshold);
  std::vector<double> inst, man, acc;
  for (int f = 0; f < folds; ++f) {
    std::vector<TaskScore> fold_scores;
    for (const auto& s : row.scores) {
      if (s.fold == f) fold_scores.push_back(s);
    }
    if (fold_scores.empty()) continue;
    const auto a = detail::aggregate(fold_scores, threshold);
    inst.push_back(a.per_instruction);
    man.push_back(a.per_manual);
    acc.push_back(a.accuracy);
  }
  row.per_instruction = {all.per_instruction, detail::population_std(inst)};
  row.per_manual = {all.per_manual, detail::population_std(man)};
  row.accuracy = {all.accuracy, detail::population_std(acc)};
  row.evaluated = row.scores.size();
}

inline FoldContext fold_context(const std::vector<TaskInstance>& tasks, const FoldSplit& split,
                                int fold) {
  FoldContext ctx;
  ctx.fold = fold;
  for (const auto& t : tasks) {
    if (split.fold_of(t.id) != fold) ctx.train.push_back(t);
  }
  ctx.pool = demo_pool(ctx.train);
  return ctx;
}

/// Cross-validated transfer evaluation: for every held-out task the model
/// picks one training-fold demo, scored by DTW-MT against the task's
/// expert demonstration.
inline ModelRow evaluate(const std::string& name, const ModelFactory& factory,
                         const std::vector<TaskInstance>& tasks, const FoldSplit& split,
                         const DtwParams& params, double threshold) {
  ModelRow row;
  row.model = name;
  for (int f = 0; f < split.folds; ++f) {
    const FoldContext ctx = fold_context(tasks, split, f);
    if (ctx.pool.empty()) continue;
    Ranker rank;
    for (const auto& t : tasks) {
      if (split.fold_of(t.id) != f) continue;
      if (!t.expert_demo) {
        ++row.skipped;
        continue;
      }
      if (!rank) rank = factory(ctx);
      const std::size_t pick = rank(t);
      const Trajectory& chosen = ctx.pool.at(pick);
      row.scores.push_back(
          {t.id, t.manual_id, f, chosen.id, dtw_mt(chosen, *t.expert_demo, params).distance});
    }
  }
  summarize(row, threshold, split.folds);
  return row;
}

/// Uniformly random training-pool trajectory.
inline ModelFactory baseline_chance(std::uint64_t seed) {
  return [seed](const FoldContext& ctx) -> Ranker {
    auto rng = std::make_shared<std::mt19937_64>(seed * 7919ULL + static_cast<std::uint64_t>(ctx.fold));
    const std::size_t n = ctx.pool.size();
    return [rng, n](const TaskInstance&) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      return pick(*rng);
    };
  };
}

inline double jaccard(const OccupancyGrid& a, const OccupancyGrid& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    inter += (a.cells[i] && b.cells[i]) ? 1 : 0;
    uni += (a.cells[i] || b.cells[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return (na == 0.0 || nb == 0.0) ? 0.0 : dot / std::sqrt(na * nb);
}

enum class DemoWeighting { random, weighted };

struct SimilarityWeights {
  double point_cloud = 0.5;
  double language = 0.5;
};

/// Nearest training task by fine-grid Jaccard and bag-of-words cosine.
class TaskSimilarity {
 public:
  TaskSimilarity(const std::vector<TaskInstance>& train, SimilarityWeights weights = {},
                 const std::set<std::string>& stop_words = default_stop_words())
      : weights_(weights) {
    std::vector<std::string> corpus;
    for (const auto& t : train) corpus.push_back(t.instruction);
    vocab_ = Vocabulary::build(corpus, stop_words);
    for (const auto& t : train) {
      grids_.push_back(voxelize(*t.part, t.frame, kFineCellSize));
      bows_.push_back(embed_language(t.instruction, vocab_).counts);
    }
  }

  double similarity(const TaskInstance& test, std::size_t train_index) const {
    const auto grid = voxelize(*test.part, test.frame, kFineCellSize);
    const auto bow = embed_language(test.instruction, vocab_).counts;
    return score(grid, bow, train_index);
  }

  /// Index of the most similar training task; ties go to the earliest.
  std::size_t nearest(const TaskInstance& test) const {
    const auto grid = voxelize(*test.part, test.frame, kFineCellSize);
    const auto bow = embed_language(test.instruction, vocab_).counts;
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < grids_.size(); ++i) {
      const double s = score(grid, bow, i);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    return best;
  }

 private:
  double score(const OccupancyGrid& grid, const std::vector<double>& bow, std::size_t i) const {
    return weights_.point_cloud * jaccard(grid, grids_[i]) + weights_.language * cosine(bow, bows_[i]);
  }

  SimilarityWeights weights_;
  Vocabulary vocab_;
  std::vector<OccupancyGrid> grids_;
  std::vector<std::vector<double>> bows_;
};

/// Transfers a demo of the most similar training task: a random one, or
/// the one with the lowest mean distance to the task's other demos.
inline ModelFactory baseline_task_similarity(DemoWeighting weighting, const DtwParams& params,
                                             std::uint64_t seed, SimilarityWeights weights = {}) {
  return [=](const FoldContext& ctx) -> Ranker {
    auto sim = std::make_shared<TaskSimilarity>(ctx.train, weights);
    std::vector<std::size_t> offset;
    std::size_t acc = 0;
    for (const auto& t : ctx.train) {
      offset.push_back(acc);
      acc += t.demos.size();
    }
    auto rng = std::make_shared<std::mt19937_64>(seed * 104729ULL + static_cast<std::uint64_t>(ctx.fold));
    const std::vector<TaskInstance>* train = &ctx.train;
    return [=](const TaskInstance& test) {
      const std::size_t k = sim->nearest(test);
      const TaskInstance& t = (*train)[k];
      std::size_t demo;
      if (weighting == DemoWeighting::weighted) {
        demo = best_demo_index(t, params);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, t.demos.size() - 1);
        demo = pick(*rng);
      }
      return offset[k] + demo;
    };
  };
}

/// Trains the network on the fold's tasks and transfers its top-ranked
/// pool trajectory.
inline ModelFactory network_model(const TrainSettings& settings) {
  return [settings](const FoldContext& ctx) -> Ranker {
    auto model = std::make_shared<TransferModel>(train_transfer_model(ctx.train, settings).model);
    auto feats = std::make_shared<Eigen::MatrixXd>(embed_candidates(ctx.pool, model->encoding));
    auto ids = std::make_shared<std::vector<std::string>>();
    for (const auto& t : ctx.pool) ids->push_back(t.id);
    return [model, feats, ids](const TaskInstance& test) {
      const auto ranked =
          rank_features(model->net, point_cloud_features(*test.part, test.frame),
                        to_vector(embed_language(test.instruction, model->vocab)), *feats, *ids);
      return ranked.front().index;
    };
  };
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : row.scores) {
      scores.push_back({{"task", s.task}, {"manual", s.manual}, {"fold", s.fold},
                        {"predicted", s.predicted}, {"dtw", s.dtw}});
    }
    rows.push_back({{"model", row.model},
                    {"per_manual_dtw", {{"mean", row.per_manual.mean}, {"std", row.per_manual.std}}},
                    {"per_instruction_dtw",
                     {{"mean", row.per_instruction.mean}, {"std", row.per_instruction.std}}},
                    {"accuracy", {{"mean", row.accuracy.mean}, {"std", row.accuracy.std}}},
                    {"evaluated", row.evaluated},
                    {"skipped", row.skipped},
                    {"scores", std::move(scores)}});
  }
  return {{"threshold", r.threshold}, {"rows", std::move(rows)}};
}

inline std::string to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "model,per_manual_mean,per_manual_std,per_instruction_mean,per_instruction_std,"
        "accuracy_mean,accuracy_std,evaluated,skipped\n";
  for (const auto& row : r.rows) {
    os << row.model << ',' << row.per_manual.mean << ',' << row.per_manual.std << ','
       << row.per_instruction.mean << ',' << row.per_instruction.std << ','
       << row.accuracy.mean << ',' << row.accuracy.std << ',' << row.evaluated << ','
       << row.skipped << '\n';
  }
  return os.str();
}

inline std::string to_text(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(26) << "model" << std::setw(18) << "per manual"
     << std::setw(18) << "per instruction" << "accuracy@" << r.threshold << " (%)\n";
  for (const auto& row : r.rows) {
    std::ostringstream a, b, c;
    a << std::fixed << std::setprecision(1) << row.per_manual.mean << " (+-" << row.per_manual.std << ")";
    b << std::fixed << std::setprecision(1) << row.per_instruction.mean << " (+-"
      << row.per_instruction.std << ")";
    c << std::fixed << std::setprecision(1) << row.accuracy.mean << " (+-" << row.accuracy.std << ")";
    os << std::setw(26) << row.model << std::setw(18) << a.str() << std::setw(18) << b.str()
       << c.str() << '\n';
  }
  return os.str();
}

}  // namespace mtransfer
