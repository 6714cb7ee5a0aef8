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
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mtransfer/dtw.hpp"
#include "mtransfer/error.hpp"
#include "mtransfer/task.hpp"

namespace mtransfer {

/// Distances below `t_g` make a positive, above `t_w` a negative.
struct NoiseThresholds {
  double t_g = 7.0;
  double t_w = 15.0;

  void validate() const {
    if (std::isnan(t_g) || std::isnan(t_w) || t_g < 0.0 || !(t_w > t_g)) {
      throw Error(ErrorCode::invalid_thresholds, "thresholds need 0 <= t_g < t_w");
    }
  }
};

struct LabeledExample {
  std::string task;
  std::string traj;
  int label = 0;
  std::optional<double> delta;  // distance to the task's best demo, when known
};

struct LabelOptions {
  // Negatives kept per task, as a multiple of its positives. 0 keeps all.
  std::size_t max_negative_ratio = 4;
  std::uint64_t seed = 0;
};

/// Index (into task.demos) of the demo with the smallest mean DTW-MT to all
/// demos of the task, itself included. Distances are accumulated in id
/// order and ties go to the lowest id, so the answer does not depend on
/// the order of `task.demos`.
inline std::size_t best_demo_index(const TaskInstance& task, const DtwParams& params) {
  const auto& demos = task.demos;
  if (demos.empty()) throw Error(ErrorCode::empty_pool, "task '" + task.id + "' has no demos");
  std::vector<std::size_t> order(demos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return demos[a].id < demos[b].id; });
  const std::size_t n = demos.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = dtw_mt(demos[order[a]], demos[order[b]], params).distance;
      dist[a * n + b] = d;
      dist[b * n + a] = d;
    }
  }
  std::size_t best = 0;
  double best_avg = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) sum += dist[a * n + b];
    const double avg = sum / static_cast<double>(n);
    if (avg < best_avg) {
      best_avg = avg;
      best = a;
    }
  }
  return order[best];
}

inline const Trajectory& select_best_demo(const TaskInstance& task, const DtwParams& params) {
  return task.demos[best_demo_index(task, params)];
}

/// Noise-handled training labels. Per task: the best demo is positive;
/// every pool trajectory within t_g of it is positive, every one beyond
/// t_w negative, the rest is ignored. Negatives are subsampled to at most
/// `max_negative_ratio` times the positives. Output order is task order,
/// best demo first, then pool order.
inline std::vector<LabeledExample> generate_examples(const std::vector<TaskInstance>& tasks,
                                                     const std::vector<Trajectory>& pool,
                                                     const NoiseThresholds& thresholds,
                                                     const DtwParams& params,
                                                     const LabelOptions& options = {}) {
  thresholds.validate();
  std::vector<LabeledExample> out;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const TaskInstance& task = tasks[ti];
    const Trajectory& best = select_best_demo(task, params);
    std::vector<LabeledExample> positives{{task.id, best.id, 1, 0.0}};
    std::vector<LabeledExample> negatives;
    std::set<std::string> seen{best.id};
    for (const auto& cand : pool) {
      if (seen.count(cand.id)) continue;
      const double d = dtw_mt(best, cand, params).distance;
      if (d < thresholds.t_g) {
        positives.push_back({task.id, cand.id, 1, d});
      } else if (d > thresholds.t_w) {
        negatives.push_back({task.id, cand.id, 0, d});
      } else {
        continue;
      }
      seen.insert(cand.id);
    }
    const std::size_t cap = options.max_negative_ratio * positives.size();
    if (options.max_negative_ratio > 0 && negatives.size() > cap) {
      std::vector<std::size_t> idx(negatives.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::mt19937_64 rng(options.seed * 1000003ULL + ti);
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(cap);
      std::sort(idx.begin(), idx.end());
      std::vector<LabeledExample> kept;
      kept.reserve(cap);
      for (std::size_t i : idx) kept.push_back(std::move(negatives[i]));
      negatives = std::move(kept);
    }
    out.insert(out.end(), positives.begin(), positives.end());
    out.insert(out.end(), negatives.begin(), negatives.end());
  }
  return out;
}

/// Labels without noise handling: every crowd demo of a task is a positive
/// for it, demos of other tasks are negatives (subsampled as above).
inline std::vector<LabeledExample> trust_all_examples(const std::vector<TaskInstance>& tasks,
                                                      const LabelOptions& options = {}) {
  std::vector<LabeledExample> out;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const TaskInstance& task = tasks[ti];
    std::set<std::string> own;
    for (const auto& d : task.demos) {
      if (own.insert(d.id).second) out.push_back({task.id, d.id, 1, std::nullopt});
    }
    std::vector<LabeledExample> negatives;
    std::set<std::string> seen = own;
    for (const auto& other : tasks) {
      if (other.id == task.id) continue;
      for (const auto& d : other.demos) {
        if (seen.insert(d.id).second) negatives.push_back({task.id, d.id, 0, std::nullopt});
      }
    }
    const std::size_t cap = options.max_negative_ratio * own.size();
    if (options.max_negative_ratio > 0 && negatives.size() > cap) {
      std::mt19937_64 rng(options.seed * 1000003ULL + ti);
      std::shuffle(negatives.begin(), negatives.end(), rng);
      negatives.resize(cap);
      std::stable_sort(negatives.begin(), negatives.end(),
                       [](const auto& a, const auto& b) { return a.traj < b.traj; });
    }
    out.insert(out.end(), negatives.begin(), negatives.end());
  }
  return out;
}

}  // namespace mtransfer
