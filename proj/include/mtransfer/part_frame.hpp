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

#include <Eigen/Eigenvalues>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtransfer/error.hpp"
#include "mtransfer/trajectory.hpp"

namespace mtransfer {

struct ColoredPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::array<std::uint8_t, 3> color{0, 0, 0};

  friend bool operator==(const ColoredPoint&, const ColoredPoint&) = default;
};

/// Segmented points of a single object part.
struct PointCloudPart {
  std::string part_id;
  std::vector<ColoredPoint> points;

  friend bool operator==(const PointCloudPart&, const PointCloudPart&) = default;
};

/// Gravity-aligned principal-axis frame of a part. Columns of `basis` are
/// the part x, y and z axes expressed in world coordinates; z points
/// against gravity.
struct PartFrame {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();
  // Set when the in-plane principal axis was undetermined and the world +x
  // tie-break was used.
  bool ambiguous = false;

  Eigen::Quaterniond rotation() const { return Eigen::Quaterniond(basis).normalized(); }

  Eigen::Vector3d to_local(const Eigen::Vector3d& world) const {
    return basis.transpose() * (world - origin);
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& local) const {
    return basis * local + origin;
  }

  friend bool operator==(const PartFrame& a, const PartFrame& b) {
    return a.origin == b.origin && a.basis == b.basis;
  }
};

inline constexpr double kFrameTolerance = 1e-9;

/// Throws invalid-argument unless the basis is orthonormal and right handed.
inline void validate_frame(const PartFrame& f) {
  if (!f.origin.allFinite() || !f.basis.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "non-finite part frame");
  }
  const double ortho =
      (f.basis.transpose() * f.basis - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kFrameTolerance || std::abs(f.basis.determinant() - 1.0) > kFrameTolerance) {
    throw Error(ErrorCode::invalid_argument, "part frame basis is not a rotation");
  }
}

namespace detail {

// Unit vector in the plane orthogonal to `z`, nearest to world +x (world +y
// if +x is parallel to z).
inline Eigen::Vector3d plane_axis_near_world_x(const Eigen::Vector3d& z) {
  Eigen::Vector3d x = Eigen::Vector3d::UnitX() - z.dot(Eigen::Vector3d::UnitX()) * z;
  if (x.norm() < 1e-9) x = Eigen::Vector3d::UnitY() - z.dot(Eigen::Vector3d::UnitY()) * z;
  return x.normalized();
}

}  // namespace detail

/// Computes the part frame: origin at the centroid, z opposite to gravity,
/// x along the first principal component of the points projected onto the
/// horizontal plane. The sign of x makes the third central moment along x
/// non-negative (dot with world +x when the moment vanishes). Symmetric
/// parts fall back to the horizontal direction nearest world +x and are
/// flagged `ambiguous`.
inline PartFrame compute_part_frame(const PointCloudPart& part,
                                    const Eigen::Vector3d& gravity = -Eigen::Vector3d::UnitZ()) {
  if (part.points.size() < 3) {
    throw Error(ErrorCode::invalid_argument,
                "part '" + part.part_id + "' needs at least 3 points");
  }
  if (!gravity.allFinite() || gravity.norm() < 1e-12) {
    throw Error(ErrorCode::invalid_argument, "gravity must be a non-zero vector");
  }
  const Eigen::Vector3d z = -gravity.normalized();

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : part.points) {
    if (!p.position.allFinite()) {
      throw Error(ErrorCode::invalid_argument, "non-finite point in part '" + part.part_id + "'");
    }
    centroid += p.position;
  }
  centroid /= static_cast<double>(part.points.size());

  const Eigen::Vector3d e1 = detail::plane_axis_near_world_x(z);
  const Eigen::Vector3d e2 = z.cross(e1);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : part.points) {
    const Eigen::Vector3d v = p.position - centroid;
    const Eigen::Vector2d u(v.dot(e1), v.dot(e2));
    cov += u * u.transpose();
  }
  cov /= static_cast<double>(part.points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double hi = eig.eigenvalues()(1);
  const double lo = eig.eigenvalues()(0);

  PartFrame frame;
  frame.origin = centroid;
  Eigen::Vector3d x;
  if (hi - lo <= 1e-9 * std::abs(hi)) {
    x = e1;
    frame.ambiguous = true;
  } else {
    const Eigen::Vector2d v = eig.eigenvectors().col(1);
    x = (v(0) * e1 + v(1) * e2).normalized();
    double moment = 0.0;
    for (const auto& p : part.points) {
      const double s = x.dot(p.position - centroid);
      moment += s * s * s;
    }
    moment /= static_cast<double>(part.points.size());
    if (std::abs(moment) < 1e-12) {
      if (x.dot(Eigen::Vector3d::UnitX()) < 0.0) x = -x;
    } else if (moment < 0.0) {
      x = -x;
    }
  }
  frame.basis.col(0) = x;
  frame.basis.col(1) = z.cross(x);
  frame.basis.col(2) = z;
  return frame;
}

inline Waypoint to_part_frame(const Waypoint& w, const PartFrame& frame) {
  return Waypoint{w.gripper, frame.to_local(w.translation),
                  (frame.rotation().conjugate() * w.rotation).normalized()};
}

inline Waypoint from_part_frame(const Waypoint& w, const PartFrame& frame) {
  return Waypoint{w.gripper, frame.to_world(w.translation),
                  (frame.rotation() * w.rotation).normalized()};
}

/// Expresses a world-frame trajectory in the part frame.
inline Trajectory to_part_frame(const Trajectory& traj, const PartFrame& frame) {
  Trajectory out{traj.id, traj.source, {}};
  out.waypoints.reserve(traj.size());
  for (const auto& w : traj.waypoints) out.waypoints.push_back(to_part_frame(w, frame));
  return out;
}

inline Trajectory from_part_frame(const Trajectory& traj, const PartFrame& frame) {
  Trajectory out{traj.id, traj.source, {}};
  out.waypoints.reserve(traj.size());
  for (const auto& w : traj.waypoints) out.waypoints.push_back(from_part_frame(w, frame));
  return out;
}

}  // namespace mtransfer
