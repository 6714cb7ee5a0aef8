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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mtransfer/part_frame.hpp"
#include "mtransfer/trajectory.hpp"

namespace mtransfer {

/// One (part, instruction) pair with the crowd demonstrations collected for
/// it. Demonstrations are stored in the part frame.
struct TaskInstance {
  std::string id;
  std::string object_id;
  std::string manual_id;
  std::shared_ptr<const PointCloudPart> part;
  PartFrame frame;
  std::string instruction;
  std::vector<Trajectory> demos;
  std::optional<Trajectory> expert_demo;  // evaluation only
};

/// All crowd demonstrations of `tasks`, in task order.
inline std::vector<Trajectory> demo_pool(const std::vector<TaskInstance>& tasks) {
  std::vector<Trajectory> pool;
  for (const auto& t : tasks) pool.insert(pool.end(), t.demos.begin(), t.demos.end());
  return pool;
}

}  // namespace mtransfer
