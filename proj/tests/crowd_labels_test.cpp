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

#include "mtransfer/crowd_labels.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "gtest/gtest.h"
#include "mtransfer/synthetic.hpp"

namespace mtransfer {
namespace {

using G = GripperState;

Trajectory Line(const std::string& id, double x) {
  return Trajectory{id, TrajectorySource::crowd,
                    {Waypoint{G::open, {x, 0, 0.1}, Eigen::Quaterniond::Identity()},
                     Waypoint{G::closed, {x, 0, 0.0}, Eigen::Quaterniond::Identity()}}};
}

TaskInstance TaskOf(const std::string& id, std::vector<Trajectory> demos) {
  TaskInstance t;
  t.id = id;
  t.demos = std::move(demos);
  return t;
}

// Brute-force medoid: full matrix including self distances.
std::string OracleBest(const TaskInstance& t, const DtwParams& p) {
  std::map<std::string, double> mean;
  for (const auto& a : t.demos) {
    double s = 0.0;
    for (const auto& b : t.demos) s += dtw_mt(a, b, p).distance;
    mean[a.id] = s / static_cast<double>(t.demos.size());
  }
  std::string best;
  double best_v = 1e300;
  for (const auto& [id, v] : mean) {  // id order, strict < keeps the lowest id
    if (v < best_v - 1e-12) {
      best_v = v;
      best = id;
    }
  }
  return best;
}

TEST(BestDemo, MedianOfLine) {
  const auto t = TaskOf("t", {Line("a", 0.0), Line("b", 0.01), Line("c", 0.02)});
  EXPECT_EQ(select_best_demo(t, DtwParams{}).id, "b");
}

TEST(BestDemo, TieGoesToLowestId) {
  const auto t = TaskOf("t", {Line("z", 0.0), Line("y", 0.0)});
  EXPECT_EQ(select_best_demo(t, DtwParams{}).id, "y");
}

TEST(BestDemo, SingleDemoAndEmptyTask) {
  EXPECT_EQ(select_best_demo(TaskOf("t", {Line("a", 0)}), DtwParams{}).id, "a");
  EXPECT_THROW(select_best_demo(TaskOf("t", {}), DtwParams{}), Error);
}

TEST(BestDemo, MatchesOracleAndIgnoresOrderOnSyntheticTasks) {
  SyntheticSpec spec;
  spec.n_tasks = 12;
  spec.demos_per_task = 6;
  spec.outlier_fraction = 0.34;
  const auto d = generate_synthetic(spec);
  std::mt19937_64 rng(3);
  for (const auto& t : d.tasks) {
    const std::string best = select_best_demo(t, DtwParams{}).id;
    EXPECT_EQ(best, OracleBest(t, DtwParams{}));
    EXPECT_FALSE(d.synthetic_outliers.count(best));
    auto shuffled = t;
    std::shuffle(shuffled.demos.begin(), shuffled.demos.end(), rng);
    EXPECT_EQ(select_best_demo(shuffled, DtwParams{}).id, best);
  }
}

TEST(Thresholds, Validation) {
  EXPECT_NO_THROW((NoiseThresholds{7, 15}.validate()));
  EXPECT_THROW((NoiseThresholds{15, 7}.validate()), Error);
  EXPECT_THROW((NoiseThresholds{5, 5}.validate()), Error);
  EXPECT_THROW((NoiseThresholds{-1, 5}.validate()), Error);
  try {
    generate_examples({}, {}, NoiseThresholds{3, 2}, DtwParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_thresholds);
  }
}

TEST(GenerateExamples, LabelsFollowDistanceBands) {
  SyntheticSpec spec;
  spec.n_tasks = 10;
  spec.demos_per_task = 5;
  const auto d = generate_synthetic(spec);
  const auto pool = demo_pool(d.tasks);
  const NoiseThresholds th{7, 15};
  LabelOptions keep_all;
  keep_all.max_negative_ratio = 0;
  const auto ex = generate_examples(d.tasks, pool, th, DtwParams{}, keep_all);
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& p : pool) by_id[p.id] = &p;
  std::size_t i = 0;
  for (const auto& t : d.tasks) {
    const Trajectory& best = select_best_demo(t, DtwParams{});
    ASSERT_LT(i, ex.size());
    EXPECT_EQ(ex[i].traj, best.id);
    EXPECT_EQ(ex[i].label, 1);
    std::size_t expected = 1;
    for (const auto& c : pool) {
      if (c.id == best.id) continue;
      const double dist = dtw_mt(best, c, DtwParams{}).distance;
      if (dist < th.t_g || dist > th.t_w) ++expected;
    }
    std::size_t got = 0;
    for (; i < ex.size() && ex[i].task == t.id; ++i, ++got) {
      const double dist = dtw_mt(best, *by_id.at(ex[i].traj), DtwParams{}).distance;
      EXPECT_NEAR(*ex[i].delta, dist, 1e-12);
      if (ex[i].label == 1) {
        EXPECT_LT(dist, th.t_g);
      } else {
        EXPECT_GT(dist, th.t_w);
      }
    }
    EXPECT_EQ(got, expected);
  }
  EXPECT_EQ(i, ex.size());
}

TEST(GenerateExamples, ClusterMembersArePositivesForTheirTask) {
  SyntheticSpec spec;
  spec.n_tasks = 20;
  spec.demos_per_task = 6;
  spec.outlier_fraction = 0.34;
  const auto d = generate_synthetic(spec);
  const auto ex = generate_examples(d.tasks, demo_pool(d.tasks), NoiseThresholds{}, DtwParams{});
  std::set<std::pair<std::string, std::string>> positives;
  for (const auto& e : ex) {
    if (e.label == 1) positives.insert({e.task, e.traj});
  }
  for (const auto& t : d.tasks) {
    for (const auto& demo : t.demos) {
      if (!d.synthetic_outliers.count(demo.id)) {
        EXPECT_TRUE(positives.count({t.id, demo.id})) << demo.id;
      }
    }
  }
}

TEST(GenerateExamples, NegativeCapAndDeterminism) {
  SyntheticSpec spec;
  spec.n_tasks = 10;
  spec.demos_per_task = 4;
  const auto d = generate_synthetic(spec);
  const auto pool = demo_pool(d.tasks);
  LabelOptions opt;
  opt.max_negative_ratio = 1;
  opt.seed = 5;
  const auto a = generate_examples(d.tasks, pool, NoiseThresholds{}, DtwParams{}, opt);
  const auto b = generate_examples(d.tasks, pool, NoiseThresholds{}, DtwParams{}, opt);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].traj, b[i].traj);
  std::map<std::string, std::pair<int, int>> per_task;
  for (const auto& e : a) (e.label ? per_task[e.task].first : per_task[e.task].second)++;
  for (const auto& [task, pn] : per_task) EXPECT_LE(pn.second, pn.first) << task;
}

TEST(TrustAll, OwnDemosPositiveOthersNegative) {
  const std::vector<TaskInstance> tasks = {TaskOf("t1", {Line("a", 0), Line("b", 1)}),
                                           TaskOf("t2", {Line("c", 2)})};
  LabelOptions keep_all;
  keep_all.max_negative_ratio = 0;
  const auto ex = trust_all_examples(tasks, keep_all);
  ASSERT_EQ(ex.size(), 6u);
  EXPECT_EQ(ex[0].traj, "a");
  EXPECT_EQ(ex[0].label, 1);
  EXPECT_EQ(ex[2].traj, "c");
  EXPECT_EQ(ex[2].label, 0);
  EXPECT_EQ(ex[3].task, "t2");
  EXPECT_EQ(ex[3].traj, "c");
  EXPECT_EQ(ex[3].label, 1);
  EXPECT_EQ(ex[4].label, 0);
  EXPECT_FALSE(ex[4].delta.has_value());
}

}  // namespace
}  // namespace mtransfer
