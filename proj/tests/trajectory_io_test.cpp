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

#include "mtransfer/trajectory_io.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "gtest/gtest.h"

namespace mtransfer {
namespace {

json Doc() {
  return json::parse(R"({"id": "d1", "source": "crowd", "waypoints": [
    {"g": "open", "t": [0, 0, 0.1], "r": [0, 0, 0, 1]},
    {"g": "closed", "t": [0.01, 0, 0.05], "r": [1, 0, 0, 0]}]})");
}

std::string FieldOf(const json& j) {
  try {
    trajectory_from_json(j, "f.json");
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.file(), "f.json");
    return e.field();
  }
  ADD_FAILURE() << "no schema error";
  return {};
}

TEST(TrajectoryIo, ParsesCanonicalDocument) {
  const auto t = trajectory_from_json(Doc());
  EXPECT_EQ(t.id, "d1");
  EXPECT_EQ(t.source, TrajectorySource::crowd);
  ASSERT_EQ(t.waypoints.size(), 2u);
  EXPECT_EQ(t.waypoints[1].gripper, GripperState::closed);
  EXPECT_EQ(t.waypoints[1].rotation.x(), 1.0);
  EXPECT_EQ(t.waypoints[0].translation.z(), 0.1);
}

TEST(TrajectoryIo, RandomRoundTripIsExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory t{"t" + std::to_string(trial), TrajectorySource::expert, {}};
    for (int i = 0; i < 7; ++i) {
      const Eigen::Quaterniond q(Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng)).normalized());
      t.waypoints.push_back(Waypoint::make(static_cast<GripperState>(i % 3),
                                           Eigen::Vector3d(n(rng), n(rng), n(rng)), q));
    }
    const auto back = trajectory_from_json(json::parse(to_json(t).dump()));
    EXPECT_EQ(back.id, t.id);
    EXPECT_EQ(back.source, t.source);
    ASSERT_EQ(back.waypoints.size(), t.waypoints.size());
    for (std::size_t i = 0; i < t.waypoints.size(); ++i) {
      EXPECT_EQ(back.waypoints[i].gripper, t.waypoints[i].gripper);
      EXPECT_EQ(back.waypoints[i].translation, t.waypoints[i].translation);
      EXPECT_EQ(back.waypoints[i].rotation.coeffs(), t.waypoints[i].rotation.coeffs());
    }
  }
}

TEST(TrajectoryIo, SourceDefaultsToCrowd) {
  auto j = Doc();
  j.erase("source");
  EXPECT_EQ(trajectory_from_json(j).source, TrajectorySource::crowd);
}

TEST(TrajectoryIo, ErrorsNameTheField) {
  auto j = Doc();
  j["waypoints"][1]["r"] = {0, 0, 0, 2};
  EXPECT_EQ(FieldOf(j), "waypoints[1].r");
  j = Doc();
  j["waypoints"][0].erase("t");
  EXPECT_EQ(FieldOf(j), "waypoints[0].t");
  j = Doc();
  j["waypoints"][1]["g"] = "ajar";
  EXPECT_EQ(FieldOf(j), "waypoints[1].g");
  j = Doc();
  j["waypoints"][0]["t"] = {0, 0};
  EXPECT_EQ(FieldOf(j), "waypoints[0].t");
  j = Doc();
  j["waypoints"] = json::array();
  EXPECT_EQ(FieldOf(j), "waypoints");
  j = Doc();
  j.erase("id");
  EXPECT_EQ(FieldOf(j), "id");
  j = Doc();
  j["source"] = "robot";
  EXPECT_EQ(FieldOf(j), "source");
}

TEST(TrajectoryIo, SlightlyOffUnitQuaternionIsNormalized) {
  auto j = Doc();
  j["waypoints"][0]["r"] = {0, 0, 0, 1.0 + 5e-7};
  const auto t = trajectory_from_json(j);
  EXPECT_NEAR(t.waypoints[0].rotation.norm(), 1.0, 1e-12);
}

TEST(TrajectoryIo, FileHelpers) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto good = (dir / "mtransfer_io_good.json").string();
  const auto bad = (dir / "mtransfer_io_bad.json").string();
  write_json_file(good, Doc());
  EXPECT_EQ(load_trajectory(good).id, "d1");
  std::ofstream(bad) << "{ not json";
  try {
    load_trajectory(bad);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.file(), bad);
  }
  try {
    load_trajectory((dir / "mtransfer_io_missing.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
  std::filesystem::remove(good);
  std::filesystem::remove(bad);
}

}  // namespace
}  // namespace mtransfer
