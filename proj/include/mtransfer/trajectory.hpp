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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtransfer/error.hpp"

namespace mtransfer {

enum class GripperState { open, closed, holding };

inline std::string_view to_string(GripperState g) {
  switch (g) {
    case GripperState::open: return "open";
    case GripperState::closed: return "closed";
    case GripperState::holding: return "holding";
  }
  return "open";
}

inline std::optional<GripperState> parse_gripper(std::string_view s) {
  if (s == "open") return GripperState::open;
  if (s == "closed") return GripperState::closed;
  if (s == "holding") return GripperState::holding;
  return std::nullopt;
}

/// Scalar encoding used in trajectory feature vectors.
inline double gripper_ordinal(GripperState g) {
  switch (g) {
    case GripperState::open: return 0.0;
    case GripperState::closed: return 1.0;
    case GripperState::holding: return 0.5;
  }
  return 0.0;
}

enum class TrajectorySource { crowd, expert, synthetic };

inline std::string_view to_string(TrajectorySource s) {
  switch (s) {
    case TrajectorySource::crowd: return "crowd";
    case TrajectorySource::expert: return "expert";
    case TrajectorySource::synthetic: return "synthetic";
  }
  return "crowd";
}

inline std::optional<TrajectorySource> parse_source(std::string_view s) {
  if (s == "crowd") return TrajectorySource::crowd;
  if (s == "expert") return TrajectorySource::expert;
  if (s == "synthetic") return TrajectorySource::synthetic;
  return std::nullopt;
}

// Inputs further than this from unit norm are rejected rather than normalized.
inline constexpr double kQuaternionTolerance = 1e-6;

/// Validates a rotation. Throws invalid-quaternion on non-finite components
/// or a norm deviating from 1 by more than 1e-6. Values already unit to
/// within rounding (1e-12) are kept bit-for-bit so stored trajectories
/// round-trip exactly; anything else is normalized.
inline Eigen::Quaterniond checked_unit(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > kQuaternionTolerance) {
    throw Error(ErrorCode::invalid_quaternion,
                "quaternion norm " + std::to_string(n) + " is not unit");
  }
  if (std::abs(n - 1.0) <= 1e-12) return q;
  return Eigen::Quaterniond(q.coeffs() / n);
}

/// Geodesic angle between two rotations in [0, pi], double-cover safe.
inline double rotation_angle(const Eigen::Quaterniond& a,
                             const Eigen::Quaterniond& b) {
  // atan2 form: accurate for small angles, where acos(|dot|) loses half
  // the significant digits.
  const Eigen::Quaterniond rel = a.conjugate() * b;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

/// Spherical linear interpolation along the shorter arc. Falls back to a
/// normalized lerp when the inputs are nearly parallel.
inline Eigen::Quaterniond slerp(const Eigen::Quaterniond& q0,
                                const Eigen::Quaterniond& q1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "slerp parameter outside [0, 1]");
  }
  const Eigen::Vector4d a = checked_unit(q0).coeffs();
  Eigen::Vector4d b = checked_unit(q1).coeffs();
  double dot = a.dot(b);
  if (dot < 0.0) {
    b = -b;
    dot = -dot;
  }
  Eigen::Vector4d out;
  if (dot > 1.0 - 1e-7) {
    out = a + t * (b - a);
  } else {
    const double theta = std::acos(dot);
    const double s = std::sin(theta);
    out = (std::sin((1.0 - t) * theta) / s) * a + (std::sin(t * theta) / s) * b;
  }
  out.normalize();
  return Eigen::Quaterniond(out(3), out(0), out(1), out(2));
}

struct Waypoint {
  GripperState gripper = GripperState::open;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  /// Validating constructor: finite translation, near-unit rotation.
  static Waypoint make(GripperState g, const Eigen::Vector3d& t,
                       const Eigen::Quaterniond& r) {
    if (!t.allFinite()) {
      throw Error(ErrorCode::invalid_argument, "non-finite translation");
    }
    return Waypoint{g, t, checked_unit(r)};
  }

  friend bool operator==(const Waypoint& a, const Waypoint& b) {
    return a.gripper == b.gripper && a.translation == b.translation &&
           a.rotation.coeffs() == b.rotation.coeffs();
  }
};

struct Trajectory {
  std::string id;
  TrajectorySource source = TrajectorySource::crowd;
  std::vector<Waypoint> waypoints;

  std::size_t size() const { return waypoints.size(); }
  bool empty() const { return waypoints.empty(); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Interpolated pose between two waypoints; gripper comes from `a`.
inline Waypoint blend(const Waypoint& a, const Waypoint& b, double t) {
  return Waypoint{a.gripper, a.translation + t * (b.translation - a.translation),
                  slerp(a.rotation, b.rotation, t)};
}

/// Inserts `samples_per_segment` evenly spaced poses into every segment.
/// Output length is m + (m - 1) * samples_per_segment.
inline Trajectory interpolate(const Trajectory& traj,
                              std::size_t samples_per_segment) {
  if (traj.size() < 2) {
    throw Error(ErrorCode::too_short, "interpolation needs at least 2 waypoints");
  }
  if (samples_per_segment < 1) {
    throw Error(ErrorCode::invalid_argument, "samples_per_segment must be >= 1");
  }
  Trajectory out{traj.id, traj.source, {}};
  out.waypoints.reserve(traj.size() + (traj.size() - 1) * samples_per_segment);
  const double denom = static_cast<double>(samples_per_segment + 1);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const Waypoint& a = traj.waypoints[i];
    const Waypoint& b = traj.waypoints[i + 1];
    out.waypoints.push_back(a);
    for (std::size_t k = 1; k <= samples_per_segment; ++k) {
      out.waypoints.push_back(blend(a, b, static_cast<double>(k) / denom));
    }
  }
  out.waypoints.push_back(traj.waypoints.back());
  return out;
}

struct GripperRun {
  GripperState state;
  std::size_t begin;  // index of first waypoint
  std::size_t count;
};

/// Maximal runs of consecutive equal gripper states.
inline std::vector<GripperRun> gripper_runs(const Trajectory& traj) {
  std::vector<GripperRun> runs;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const GripperState g = traj.waypoints[i].gripper;
    if (runs.empty() || runs.back().state != g) {
      runs.push_back({g, i, 1});
    } else {
      ++runs.back().count;
    }
  }
  return runs;
}

/// Largest-remainder apportionment of `total` slots proportional to
/// `weights`, with every entry receiving at least one slot. Exact integer
/// arithmetic, ties go to the earlier entry.
inline std::vector<std::size_t> apportion(const std::vector<std::size_t>& weights,
                                          std::size_t total) {
  const std::size_t k = weights.size();
  if (total < k) {
    throw Error(ErrorCode::cannot_preserve_gripper_sequence,
                "target length " + std::to_string(total) + " is below run count " +
                    std::to_string(k));
  }
  const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> alloc(k, 0);
  std::vector<std::size_t> rem(k, 0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    alloc[i] = total * weights[i] / sum;
    rem[i] = total * weights[i] % sum;
    used += alloc[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t r = 0; used < total; ++r, ++used) ++alloc[order[r % k]];

  // Floor of one: borrow from the currently largest allocation.
  for (std::size_t i = 0; i < k; ++i) {
    if (alloc[i] > 0) continue;
    std::size_t donor = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (alloc[j] > alloc[donor]) donor = j;
    }
    --alloc[donor];
    alloc[i] = 1;
  }
  return alloc;
}

namespace detail {

// Resamples waypoints [begin, begin+count) to `samples` poses at uniform
// translation arc length. Falls back to uniform index spacing when the run
// does not move.
inline void resample_run(const std::vector<Waypoint>& src, std::size_t begin,
                         std::size_t count, std::size_t samples,
                         std::vector<Waypoint>& out) {
  if (count == samples) {
    out.insert(out.end(), src.begin() + begin, src.begin() + begin + count);
    return;
  }
  if (count == 1 || samples == 1) {
    for (std::size_t j = 0; j < samples; ++j) out.push_back(src[begin]);
    return;
  }
  std::vector<double> cum(count, 0.0);
  for (std::size_t i = 1; i < count; ++i) {
    cum[i] = cum[i - 1] + (src[begin + i].translation - src[begin + i - 1].translation).norm();
  }
  const double length = cum.back();
  std::size_t seg = 0;
  for (std::size_t j = 0; j < samples; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(samples - 1);
    if (j + 1 == samples) {
      out.push_back(src[begin + count - 1]);
      break;
    }
    if (length <= 0.0) {
      const double pos = u * static_cast<double>(count - 1);
      const auto i = static_cast<std::size_t>(pos);
      out.push_back(blend(src[begin + i], src[begin + i + 1], pos - static_cast<double>(i)));
      continue;
    }
    const double s = u * length;
    while (seg + 2 < count && cum[seg + 1] <= s) ++seg;
    const double span = cum[seg + 1] - cum[seg];
    const double t = span > 0.0 ? std::clamp((s - cum[seg]) / span, 0.0, 1.0) : 0.0;
    out.push_back(blend(src[begin + seg], src[begin + seg + 1], t));
  }
}

}  // namespace detail

/// Resamples to exactly `target_len` waypoints while keeping the ordered
/// sequence of gripper runs. Each run gets a share proportional to its
/// length (see apportion) and is resampled at uniform arc length. A run
/// whose share equals its current length is copied verbatim, which makes
/// the operation idempotent.
inline Trajectory normalize_length(const Trajectory& traj, std::size_t target_len) {
  if (traj.empty()) {
    throw Error(ErrorCode::too_short, "cannot normalize an empty trajectory");
  }
  const auto runs = gripper_runs(traj);
  std::vector<std::size_t> lengths;
  lengths.reserve(runs.size());
  for (const auto& r : runs) lengths.push_back(r.count);
  const auto alloc = apportion(lengths, target_len);

  Trajectory out{traj.id, traj.source, {}};
  out.waypoints.reserve(target_len);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    detail::resample_run(traj.waypoints, runs[r].begin, runs[r].count, alloc[r],
                         out.waypoints);
  }
  return out;
}

}  // namespace mtransfer
