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

#include "mtransfer/eval.hpp"

#include <cmath>

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

// Every task: expert at x = 0, one good demo at x = 0 and three at
// distance > 5 (cost decays away from the part origin, so stay close).
std::vector<TaskInstance> QuarterGoodTasks(int n) {
  std::vector<TaskInstance> tasks;
  for (int i = 0; i < n; ++i) {
    TaskInstance t;
    t.id = "t" + std::to_string(i);
    t.manual_id = "m" + std::to_string(i);
    t.expert_demo = Line(t.id + "-e", 0.0);
    t.demos = {Line(t.id + "-g", 0.0), Line(t.id + "-b1", 0.1), Line(t.id + "-b2", -0.1),
               Line(t.id + "-b3", 0.12)};
    tasks.push_back(t);
  }
  return tasks;
}

SyntheticSpec SmallSpec() {
  SyntheticSpec spec;
  spec.n_tasks = 20;
  spec.demos_per_task = 5;
  return spec;
}

TEST(Folds, ManualsStayTogetherAndCoverAllFolds) {
  const auto d = generate_synthetic(SmallSpec());
  const auto split = make_folds(d.tasks, 3);
  std::map<std::string, int> manual_fold;
  std::set<int> used;
  for (const auto& t : d.tasks) {
    const int f = split.fold_of(t.id);
    used.insert(f);
    const auto [it, fresh] = manual_fold.emplace(t.manual_id, f);
    if (!fresh) {
      EXPECT_EQ(it->second, f);
    }
  }
  EXPECT_EQ(used.size(), 5u);
  EXPECT_EQ(make_folds(d.tasks, 3).fold_of_task, split.fold_of_task);
  EXPECT_THROW(split.fold_of("nope"), Error);
}

TEST(Folds, TooFewManuals) {
  try {
    make_folds(QuarterGoodTasks(4), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::too_few_manuals);
  }
  EXPECT_NO_THROW(make_folds(QuarterGoodTasks(4), 0, 2));
}

TEST(Evaluate, ExpertReturningModelScoresPerfectly) {
  const auto tasks = QuarterGoodTasks(10);
  const auto split = make_folds(tasks, 1);
  // The "-g" demos equal the expert demo.
  const ModelFactory oracle = [](const FoldContext& ctx) -> Ranker {
    return [&ctx](const TaskInstance&) {
      for (std::size_t i = 0; i < ctx.pool.size(); ++i) {
        if (ctx.pool[i].id.back() == 'g') return i;
      }
      return std::size_t{0};
    };
  };
  const auto row = evaluate("oracle", oracle, tasks, split, DtwParams{}, 10.0);
  EXPECT_EQ(row.evaluated, 10u);
  EXPECT_EQ(row.accuracy.mean, 100.0);
  EXPECT_EQ(row.per_instruction.mean, 0.0);
  EXPECT_EQ(row.per_manual.mean, 0.0);
}

TEST(Evaluate, ChanceConvergesToGoodFraction) {
  const auto tasks = QuarterGoodTasks(10);
  for (double x : {0.1, -0.1, 0.12}) ASSERT_GT(dtw_mt(Line("a", 0.0), Line("b", x), DtwParams{}).distance, 5.0);
  const auto split = make_folds(tasks, 2);
  std::size_t good = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto row = evaluate("chance", baseline_chance(seed), tasks, split, DtwParams{}, 5.0);
    for (const auto& s : row.scores) good += s.dtw < 5.0 ? 1 : 0;
    total += row.scores.size();
  }
  const double q = 0.25, n = static_cast<double>(total);
  const double rate = static_cast<double>(good) / n;
  EXPECT_NEAR(rate, q, 3.0 * std::sqrt(q * (1 - q) / n));
}

TEST(Evaluate, AccuracyMonotoneInThreshold) {
  const auto d = generate_synthetic(SmallSpec());
  const auto split = make_folds(d.tasks, 4);
  auto row = evaluate("chance", baseline_chance(1), d.tasks, split, DtwParams{}, 10.0);
  double last = -1.0;
  for (double th = 0.0; th < 40.0; th += 0.5) {
    summarize(row, th, split.folds);
    EXPECT_GE(row.accuracy.mean, last);
    EXPECT_GE(row.accuracy.mean, 0.0);
    EXPECT_LE(row.accuracy.mean, 100.0);
    last = row.accuracy.mean;
  }
  EXPECT_EQ(last, 100.0);
}

TEST(Evaluate, SingleInstructionManualsGiveEqualMeans) {
  auto spec = SmallSpec();
  spec.max_instructions_per_manual = 1;
  const auto d = generate_synthetic(spec);
  const auto split = make_folds(d.tasks, 6);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto row = evaluate("chance", baseline_chance(seed), d.tasks, split, DtwParams{}, 10.0);
    EXPECT_EQ(row.per_instruction.mean, row.per_manual.mean);
  }
}

TEST(Evaluate, PerManualAveragesInstructionsFirst) {
  ModelRow row;
  row.scores = {{"a", "m1", 0, "x", 2.0}, {"b", "m1", 0, "x", 4.0}, {"c", "m2", 1, "x", 12.0}};
  summarize(row, 10.0, 2);
  EXPECT_DOUBLE_EQ(row.per_instruction.mean, 6.0);
  EXPECT_DOUBLE_EQ(row.per_manual.mean, 7.5);
  EXPECT_NEAR(row.accuracy.mean, 200.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(row.accuracy.std, 50.0);  // folds at 100% and 0%
  EXPECT_DOUBLE_EQ(row.per_instruction.std, 4.5);
}

TEST(Evaluate, TasksWithoutExpertAreSkipped) {
  auto tasks = QuarterGoodTasks(6);
  tasks[0].expert_demo.reset();
  const auto row = evaluate("chance", baseline_chance(0), tasks, make_folds(tasks, 0), DtwParams{}, 10.0);
  EXPECT_EQ(row.skipped, 1u);
  EXPECT_EQ(row.evaluated, 5u);
}

TEST(Similarity, JaccardAndCosine) {
  OccupancyGrid a, b;
  EXPECT_EQ(jaccard(a, b), 0.0);
  a.cells[1] = true;
  EXPECT_EQ(jaccard(a, a), 1.0);
  b.cells[2] = true;
  EXPECT_EQ(jaccard(a, b), 0.0);
  b.cells[1] = true;
  EXPECT_DOUBLE_EQ(jaccard(a, b), 0.5);
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {2, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {0, 3}), 0.0);
  EXPECT_EQ(cosine({0, 0}, {1, 1}), 0.0);
}

TEST(Similarity, NearestTaskIsItselfWhenPresent) {
  const auto d = generate_synthetic(SmallSpec());
  const TaskSimilarity sim(d.tasks);
  for (std::size_t i = 0; i < d.tasks.size(); ++i) {
    const std::size_t k = sim.nearest(d.tasks[i]);
    EXPECT_NEAR(sim.similarity(d.tasks[i], k), 1.0, 1e-12);
  }
}

TEST(Similarity, WeightedBaselineAvoidsOutlier) {
  auto tasks = QuarterGoodTasks(2);
  for (auto& t : tasks) {
    t.part = std::make_shared<PointCloudPart>(PointCloudPart{"p", {{Eigen::Vector3d::Zero(), {0, 0, 0}}}});
    t.instruction = "turn the knob";
    t.demos = {Line(t.id + "-a", 0.0), Line(t.id + "-b", 0.001), Line(t.id + "-out", 0.1)};
  }
  FoldContext ctx{0, {tasks[0]}, tasks[0].demos};
  const auto rank = baseline_task_similarity(DemoWeighting::weighted, DtwParams{}, 0)(ctx);
  const auto pick = ctx.pool[rank(tasks[1])].id;
  EXPECT_NE(pick, "t0-out");
}

TEST(Report, FormatsCarryAllRows) {
  const auto tasks = QuarterGoodTasks(6);
  EvalReport r;
  r.rows.push_back(evaluate("chance", baseline_chance(0), tasks, make_folds(tasks, 0), DtwParams{}, 10.0));
  const auto j = to_json(r);
  EXPECT_EQ(j["rows"][0]["model"], "chance");
  EXPECT_EQ(j["rows"][0]["scores"].size(), 6u);
  EXPECT_NE(to_csv(r).find("\nchance,"), std::string::npos);
  EXPECT_NE(to_text(r).find("chance"), std::string::npos);
}

}  // namespace
}  // namespace mtransfer
