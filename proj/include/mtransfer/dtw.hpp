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

#include <cassert>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "mtransfer/error.hpp"
#include "mtransfer/trajectory.hpp"

namespace mtransfer {

/// Scales of the manipulation-trajectory DTW cost.
struct DtwParams {
  double alpha_t = 0.005;  // meters
  double alpha_r = 0.5;    // radians
  double beta = 1.0;       // gripper mismatch weight
  double gamma = 4.0;      // proximity decay, 1/m
  // Penalize equal gripper states instead of differing ones, as the cost
  // formula is literally printed. Off by default.
  bool literal_gripper_indicator = false;

  void validate() const {
    const bool finite = std::isfinite(alpha_t) && std::isfinite(alpha_r) &&
                        std::isfinite(beta) && std::isfinite(gamma);
    if (!finite || alpha_t <= 0.0 || alpha_r <= 0.0 || beta < 0.0 || gamma < 0.0) {
      throw Error(ErrorCode::invalid_argument,
                  "DTW params need alpha_t, alpha_r > 0 and beta, gamma >= 0");
    }
  }
};

struct DtwResult {
  double distance = 0.0;
  double cumulative = 0.0;  // D(m_A, m_B) before normalization
  std::vector<std::pair<std::size_t, std::size_t>> path;  // 0-based (i, j)

  std::size_t path_len() const { return path.size(); }
};

inline double proximity_weight(const Waypoint& w, double gamma) {
  return std::exp(-gamma * w.translation.norm());
}

/// Local cost between two part-frame waypoints.
inline double waypoint_cost(const Waypoint& a, const Waypoint& b, const DtwParams& params) {
  const double na = a.rotation.norm();
  const double nb = b.rotation.norm();
  if (std::abs(na - 1.0) > kQuaternionTolerance || std::abs(nb - 1.0) > kQuaternionTolerance) {
    throw Error(ErrorCode::invalid_quaternion, "waypoint rotation is not unit");
  }
  const double d_t = (a.translation - b.translation).norm();
  const double d_r = rotation_angle(a.rotation, b.rotation);
  const bool differ = a.gripper != b.gripper;
  const double d_g = (params.literal_gripper_indicator ? !differ : differ) ? 1.0 : 0.0;
  return proximity_weight(a, params.gamma) * proximity_weight(b, params.gamma) *
         (d_t / params.alpha_t + d_r / params.alpha_r) * (1.0 + params.beta * d_g);
}

/// DTW-MT: cumulative cost of the optimal monotone warping normalized by
/// the number of matched pairs on that warping. Ties prefer the diagonal,
/// then the shorter path, so the result is exactly symmetric in (a, b).
inline DtwResult dtw_mt(const Trajectory& a, const Trajectory& b, const DtwParams& params) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::too_short, "DTW needs non-empty trajectories");
  }
  params.validate();
  const std::size_t ma = a.size();
  const std::size_t mb = b.size();
  std::vector<double> cost(ma * mb);
  std::vector<std::size_t> len(ma * mb);
  std::vector<unsigned char> step(ma * mb);  // 0 start, 1 diag, 2 up (i-1), 3 left (j-1)
  auto at = [mb](std::size_t i, std::size_t j) { return i * mb + j; };

  for (std::size_t i = 0; i < ma; ++i) {
    for (std::size_t j = 0; j < mb; ++j) {
      const double c = waypoint_cost(a.waypoints[i], b.waypoints[j], params);
      const std::size_t k = at(i, j);
      if (i == 0 && j == 0) {
        cost[k] = c;
        len[k] = 1;
        step[k] = 0;
        continue;
      }
      if (i == 0) {
        cost[k] = c + cost[at(0, j - 1)];
        len[k] = j + 1;
        step[k] = 3;
        continue;
      }
      if (j == 0) {
        cost[k] = c + cost[at(i - 1, 0)];
        len[k] = i + 1;
        step[k] = 2;
        continue;
      }
      const double diag = cost[at(i - 1, j - 1)];
      const double up = cost[at(i - 1, j)];
      const double left = cost[at(i, j - 1)];
      const double best = std::min(diag, std::min(up, left));
      unsigned char s;
      std::size_t prev;
      if (diag == best) {
        s = 1;
        prev = at(i - 1, j - 1);
      } else if (up == best && left == best) {
        const bool take_up = len[at(i - 1, j)] <= len[at(i, j - 1)];
        s = take_up ? 2 : 3;
        prev = take_up ? at(i - 1, j) : at(i, j - 1);
      } else if (up == best) {
        s = 2;
        prev = at(i - 1, j);
      } else {
        s = 3;
        prev = at(i, j - 1);
      }
      cost[k] = c + best;
      len[k] = len[prev] + 1;
      step[k] = s;
    }
  }

  DtwResult out;
  out.cumulative = cost[at(ma - 1, mb - 1)];
  out.path.resize(len[at(ma - 1, mb - 1)]);
  std::size_t i = ma - 1;
  std::size_t j = mb - 1;
  for (std::size_t n = out.path.size(); n-- > 0;) {
    out.path[n] = {i, j};
    switch (step[at(i, j)]) {
      case 1: --i; --j; break;
      case 2: --i; break;
      case 3: --j; break;
      default: break;
    }
  }
#ifndef NDEBUG
  assert(out.path.front() == std::make_pair(std::size_t{0}, std::size_t{0}));
  for (std::size_t n = 1; n < out.path.size(); ++n) {
    const auto di = out.path[n].first - out.path[n - 1].first;
    const auto dj = out.path[n].second - out.path[n - 1].second;
    assert(di <= 1 && dj <= 1 && di + dj >= 1);
  }
#endif
  out.distance = out.cumulative / static_cast<double>(out.path.size());
  return out;
}

/// Mean DTW-MT from `t` to every trajectory in `pool`.
inline double average_distance(const Trajectory& t, const std::vector<Trajectory>& pool,
                               const DtwParams& params) {
  if (pool.empty()) throw Error(ErrorCode::empty_pool, "average over an empty pool");
  double sum = 0.0;
  for (const auto& u : pool) sum += dtw_mt(t, u, params).distance;
  return sum / static_cast<double>(pool.size());
}

}  // namespace mtransfer
