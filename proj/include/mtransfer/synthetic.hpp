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

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtransfer/dataset.hpp"
#include "mtransfer/error.hpp"
#include "mtransfer/part_frame.hpp"
#include "mtransfer/trajectory.hpp"

namespace mtransfer {

/// Parameters of a generated dataset.
struct SyntheticSpec {
  std::size_t n_tasks = 40;
  std::size_t demos_per_task = 8;
  double outlier_fraction = 0.2;
  double translation_sigma = 0.003;  // meters, per waypoint
  double rotation_sigma = 0.04;      // radians, per waypoint
  std::size_t points_per_part = 300;
  std::size_t max_instructions_per_manual = 2;
  std::uint64_t shape_seed = 7;  // per-task shape and motion variation
  std::uint64_t rng_seed = 1;    // placement and demo noise

  void validate() const {
    const bool ok = n_tasks > 0 && demos_per_task > 0 && outlier_fraction >= 0.0 &&
                    outlier_fraction <= 1.0 && translation_sigma >= 0.0 && rotation_sigma >= 0.0 &&
                    points_per_part >= 3 && max_instructions_per_manual > 0;
    if (!ok) throw Error(ErrorCode::invalid_argument, "invalid synthetic dataset spec");
  }
};

inline constexpr int kSyntheticFamilies = 6;

namespace synth {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
inline double gauss(Rng& rng, double sigma) {
  return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
}

inline Eigen::Quaterniond axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized()));
}

// Gripper pointing down (tool z along world -z).
inline Eigen::Quaterniond down() { return axis_angle(Eigen::Vector3d::UnitX(), M_PI); }
// Gripper pointing along +y (approach from the front).
inline Eigen::Quaterniond forward() { return axis_angle(Eigen::Vector3d::UnitX(), -M_PI / 2); }

inline Waypoint wp(GripperState g, double x, double y, double z, const Eigen::Quaterniond& q) {
  return Waypoint{g, Eigen::Vector3d(x, y, z), q.normalized()};
}

/// Per-task variation of one family.
struct Variation {
  double scale = 1.0;   // motion amplitude
  double size = 1.0;    // part size
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  double twist = 0.0;   // extra rotation about z, radians
};

inline const std::array<const char*, kSyntheticFamilies> kFamilyNames = {
    "knob", "handle", "button", "drawer", "lid", "lever"};

inline const std::array<std::vector<std::string>, kSyntheticFamilies> kTemplates = {{
    {"turn the {o} knob clockwise", "rotate the dial on the {o} to the right",
     "twist the {o} knob a quarter turn"},
    {"pull the {o} handle down", "push down on the handle of the {o}",
     "pull the lever handle downward"},
    {"press the {o} button", "push the power button on the {o}", "press the start button"},
    {"pull the {o} drawer open", "open the {o} door by pulling the handle outward",
     "pull out the drawer"},
    {"lift the {o} lid", "open the lid of the {o} by lifting it up", "raise the cover lid"},
    {"push the {o} lever sideways", "flip the switch on the {o}", "slide the lever to the left"},
}};

inline const std::array<const char*, 10> kObjectNames = {
    "stove", "toaster", "kettle", "microwave", "coffee", "juicer", "sink", "oven", "dispenser", "cooker"};

/// Canonical part cloud for a family, elongated along +x with extra mass at
/// the +x end so the frame sign is well determined.
inline PointCloudPart family_shape(int family, const Variation& v, std::size_t n, Rng& rng) {
  PointCloudPart part;
  part.points.reserve(n);
  const std::uint8_t base = static_cast<std::uint8_t>(60 + 30 * family);
  auto push = [&](double x, double y, double z) {
    ColoredPoint p;
    p.position = Eigen::Vector3d(x, y, z) +
                 Eigen::Vector3d(gauss(rng, 0.0015), gauss(rng, 0.0015), gauss(rng, 0.0015));
    p.color = {base, static_cast<std::uint8_t>(255 - base), static_cast<std::uint8_t>(40 * family)};
    part.points.push_back(p);
  };
  const double s = v.size;
  for (std::size_t i = 0; i < n; ++i) {
    // a quarter of the points form a nub beyond +x
    const bool nub = i % 4 == 0;
    switch (family) {
      case 0: {  // knob: disk with a pointer
        if (nub) {
          push(uniform(rng, 0.02, 0.035) * s, uniform(rng, -0.004, 0.004), uniform(rng, 0.0, 0.02));
        } else {
          const double a = uniform(rng, 0, 2 * M_PI), r = 0.02 * s * std::sqrt(uniform(rng, 0, 1));
          push(r * std::cos(a), 0.7 * r * std::sin(a), uniform(rng, 0.0, 0.02));
        }
        break;
      }
      case 1:  // handle: long bar
        push(uniform(rng, -0.06, nub ? 0.09 : 0.06) * s, uniform(rng, -0.008, 0.008),
             uniform(rng, -0.008, 0.008));
        break;
      case 2:  // button: small flat box
        push(uniform(rng, -0.015, nub ? 0.03 : 0.015) * s, uniform(rng, -0.01, 0.01) * s,
             uniform(rng, -0.004, 0.004));
        break;
      case 3:  // drawer front: wide vertical plate
        push(uniform(rng, -0.09, nub ? 0.12 : 0.09) * s, uniform(rng, -0.005, 0.005),
             uniform(rng, -0.04, 0.04) * s);
        break;
      case 4: {  // lid: flat ellipse
        const double a = uniform(rng, 0, 2 * M_PI), r = std::sqrt(uniform(rng, 0, 1));
        const double x = nub ? uniform(rng, 0.06, 0.08) * s : 0.06 * s * r * std::cos(a);
        push(x, 0.035 * s * r * std::sin(a), uniform(rng, -0.004, 0.004));
        break;
      }
      default:  // lever: thin bar with a ball
        if (nub) {
          push(uniform(rng, 0.04, 0.06) * s, uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01));
        } else {
          push(uniform(rng, -0.05, 0.04) * s, uniform(rng, -0.004, 0.004), uniform(rng, -0.004, 0.004));
        }
        break;
    }
  }
  return part;
}

/// Ground-truth manipulation in canonical part coordinates.
inline Trajectory family_motion(int family, const Variation& v) {
  using G = GripperState;
  const double s = v.scale;
  const auto tw = axis_angle(Eigen::Vector3d::UnitZ(), v.twist);
  // each family grips with its own roll about the tool axis
  const auto roll = axis_angle(Eigen::Vector3d::UnitZ(), family * M_PI / 3);
  const auto dn = tw * down() * roll;
  const auto fw = tw * forward() * roll;
  Trajectory t;
  auto& w = t.waypoints;
  switch (family) {
    case 0: {
      const double turn = M_PI / 2 * s;
      const auto rot = [&](double a) { return axis_angle(Eigen::Vector3d::UnitZ(), a) * dn; };
      w = {wp(G::open, 0, 0, 0.10, dn),          wp(G::open, 0, 0, 0.035, dn),
           wp(G::closed, 0, 0, 0.025, dn),       wp(G::closed, 0, 0, 0.025, rot(turn / 2)),
           wp(G::closed, 0, 0, 0.025, rot(turn)), wp(G::open, 0, 0, 0.025, rot(turn)),
           wp(G::open, 0, 0, 0.10, rot(turn))};
      break;
    }
    case 1: {
      const double d = 0.08 * s;
      w = {wp(G::open, 0, -0.10, 0, fw),           wp(G::open, 0, -0.025, 0, fw),
           wp(G::closed, 0, -0.015, 0, fw),        wp(G::closed, 0, -0.025, -d / 2, fw),
           wp(G::closed, 0, -0.04, -d, fw),        wp(G::open, 0, -0.04, -d, fw),
           wp(G::open, 0, -0.12, -d, fw)};
      break;
    }
    case 2: {
      const double d = 0.008 * s;
      w = {wp(G::closed, 0, 0, 0.09, dn), wp(G::closed, 0, 0, 0.03, dn),
           wp(G::closed, 0, 0, 0.004 - d, dn), wp(G::closed, 0, 0, 0.03, dn),
           wp(G::closed, 0, 0, 0.09, dn)};
      break;
    }
    case 3: {
      const double d = 0.12 * s;
      w = {wp(G::open, 0, -0.12, 0, fw),           wp(G::open, 0, -0.03, 0, fw),
           wp(G::closed, 0, -0.02, 0, fw),         wp(G::closed, 0, -0.02 - d / 2, 0, fw),
           wp(G::closed, 0, -0.02 - d, 0, fw),     wp(G::open, 0, -0.02 - d, 0, fw),
           wp(G::open, 0, -0.06 - d, 0.05, fw)};
      break;
    }
    case 4: {
      const double a = 0.065 * v.size;
      const double h = 0.10 * s;
      const auto tilt = axis_angle(Eigen::Vector3d::UnitY(), -0.5 * s) * dn;
      w = {wp(G::open, a, 0, 0.08, dn),    wp(G::open, a, 0, 0.02, dn),
           wp(G::closed, a, 0, 0.008, dn), wp(G::closed, a, 0, h / 2, dn),
           wp(G::closed, a * 0.6, 0, h, tilt), wp(G::open, a * 0.6, 0, h, tilt),
           wp(G::open, a * 0.6, 0, h + 0.06, tilt)};
      break;
    }
    default: {
      const double d = 0.06 * s;
      w = {wp(G::closed, 0.04, -0.08, 0.03, fw), wp(G::closed, 0.04, -0.02, 0.0, fw),
           wp(G::closed, 0.04, -0.02 + d / 2, 0.0, fw), wp(G::closed, 0.04, -0.02 + d, 0.0, fw),
           wp(G::closed, 0.04, -0.06, 0.06, fw)};
      break;
    }
  }
  for (auto& x : w) x.translation += v.offset;
  return t;
}

inline Variation random_variation(Rng& rng) {
  Variation v;
  v.scale = uniform(rng, 0.85, 1.15);
  v.size = uniform(rng, 0.85, 1.15);
  v.offset = Eigen::Vector3d(uniform(rng, -0.004, 0.004), uniform(rng, -0.004, 0.004),
                             uniform(rng, -0.004, 0.004));
  v.twist = uniform(rng, -0.1, 0.1);
  return v;
}

inline Waypoint perturb(const Waypoint& w, double sigma_t, double sigma_r, Rng& rng) {
  Waypoint out = w;
  out.translation += Eigen::Vector3d(gauss(rng, sigma_t), gauss(rng, sigma_t), gauss(rng, sigma_t));
  const Eigen::Vector3d axis(gauss(rng, 1.0), gauss(rng, 1.0), gauss(rng, 1.0));
  if (axis.norm() > 1e-12) out.rotation = (axis_angle(axis, gauss(rng, sigma_r)) * w.rotation).normalized();
  return out;
}

/// A crowd-like copy of `truth`: per-waypoint noise and random re-timing
/// (occasional duplicated or inserted intermediate waypoints).
inline Trajectory noisy_copy(const Trajectory& truth, double sigma_t, double sigma_r, Rng& rng) {
  Trajectory out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out.waypoints.push_back(perturb(truth.waypoints[i], sigma_t, sigma_r, rng));
    if (i + 1 < truth.size() && uniform(rng, 0, 1) < 0.25) {
      out.waypoints.push_back(perturb(blend(truth.waypoints[i], truth.waypoints[i + 1], 0.5),
                                      sigma_t, sigma_r, rng));
    }
  }
  return out;
}

/// A careless demonstration: a different family's motion, grossly shifted.
inline Trajectory outlier(int family, Rng& rng) {
  const int other = (family + 1 + static_cast<int>(rng() % (kSyntheticFamilies - 1))) % kSyntheticFamilies;
  Variation v = random_variation(rng);
  v.offset += Eigen::Vector3d(uniform(rng, -0.08, 0.08), uniform(rng, -0.08, 0.08), uniform(rng, 0.04, 0.1));
  Trajectory t = family_motion(other, v);
  for (auto& w : t.waypoints) {
    w.rotation = (axis_angle(Eigen::Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), 1.0),
                             uniform(rng, 1.2, 2.4)) *
                  w.rotation)
                     .normalized();
  }
  return t;
}

inline Trajectory transform(const Trajectory& t, const Eigen::Isometry3d& m) {
  Trajectory out = t;
  const Eigen::Quaterniond q(m.rotation());
  for (auto& w : out.waypoints) {
    w.translation = m * w.translation;
    w.rotation = (q * w.rotation).normalized();
  }
  return out;
}

}  // namespace synth

/// Generates tasks from six manipulation families (knob, handle, button,
/// drawer, lid, lever). Each task gets a posed part cloud, a templated
/// instruction, an expert (ground-truth) demo and crowd demos that are
/// noisy copies of it plus a fraction of outliers. Deterministic per seed.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  synth::Rng shape_rng(spec.shape_seed);
  synth::Rng rng(spec.rng_seed);
  Dataset d;
  d.meta.name = "synthetic-" + std::to_string(spec.rng_seed);
  const auto outliers_per_task = static_cast<std::size_t>(
      std::floor(spec.outlier_fraction * static_cast<double>(spec.demos_per_task) + 0.5));

  std::size_t object_index = 0;
  std::size_t in_object = spec.max_instructions_per_manual;
  std::size_t object_capacity = 0;
  Eigen::Isometry3d object_pose = Eigen::Isometry3d::Identity();
  for (std::size_t ti = 0; ti < spec.n_tasks; ++ti) {
    if (in_object >= object_capacity) {
      ++object_index;
      in_object = 0;
      object_capacity = 1 + static_cast<std::size_t>(shape_rng() % spec.max_instructions_per_manual);
      object_pose = Eigen::Isometry3d::Identity();
      object_pose.rotate(Eigen::AngleAxisd(synth::uniform(rng, -M_PI, M_PI), Eigen::Vector3d::UnitZ()));
      object_pose.pretranslate(Eigen::Vector3d(synth::uniform(rng, -1, 1), synth::uniform(rng, -1, 1),
                                               synth::uniform(rng, 0.5, 1.2)));
    }
    const int family = static_cast<int>(shape_rng() % kSyntheticFamilies);
    const synth::Variation var = synth::random_variation(shape_rng);

    char buf[64];
    std::snprintf(buf, sizeof buf, "obj%03zu", object_index);
    const std::string object_id = buf;
    std::snprintf(buf, sizeof buf, "task%04zu", ti);
    const std::string task_id = buf;

    // Each part sits somewhere on its object, rotated about gravity.
    Eigen::Isometry3d pose = object_pose;
    pose.translate(Eigen::Vector3d(0.25 * static_cast<double>(in_object), 0.0, 0.0));
    pose.rotate(Eigen::AngleAxisd(synth::uniform(rng, -M_PI, M_PI), Eigen::Vector3d::UnitZ()));

    PointCloudPart canonical = synth::family_shape(family, var, spec.points_per_part, rng);
    const PartFrame canonical_frame = compute_part_frame(canonical);
    auto world = std::make_shared<PointCloudPart>();
    world->part_id = std::string(synth::kFamilyNames[static_cast<std::size_t>(family)]) + "-" +
                     std::to_string(in_object);
    for (const auto& p : canonical.points) world->points.push_back({pose * p.position, p.color});

    TaskInstance t;
    t.id = task_id;
    t.object_id = object_id;
    t.manual_id = object_id + "-manual";
    t.part = world;
    t.frame = compute_part_frame(*world);
    const auto& templates = synth::kTemplates[static_cast<std::size_t>(family)];
    std::string text = templates[shape_rng() % templates.size()];
    const auto pos = text.find("{o}");
    if (pos != std::string::npos) {
      text.replace(pos, 3, synth::kObjectNames[shape_rng() % synth::kObjectNames.size()]);
    }
    t.instruction = text;

    // Motions are authored relative to the canonical cloud's frame, carried
    // into the world, and read back through the posed cloud's frame.
    const Trajectory canonical_truth =
        from_part_frame(synth::family_motion(family, var), canonical_frame);
    const auto to_task = [&](const Trajectory& canonical_traj) {
      return to_part_frame(synth::transform(canonical_traj, pose), t.frame);
    };
    Trajectory expert = to_task(canonical_truth);
    expert.id = task_id + "-expert";
    expert.source = TrajectorySource::expert;
    t.expert_demo = expert;

    for (std::size_t k = 0; k < spec.demos_per_task; ++k) {
      const bool is_outlier = k >= spec.demos_per_task - outliers_per_task;
      Trajectory demo =
          is_outlier
              ? to_task(from_part_frame(synth::outlier(family, rng), canonical_frame))
              : to_task(synth::noisy_copy(canonical_truth, spec.translation_sigma, spec.rotation_sigma, rng));
      std::snprintf(buf, sizeof buf, "%s-d%02zu", task_id.c_str(), k);
      demo.id = buf;
      demo.source = TrajectorySource::synthetic;
      if (is_outlier) d.synthetic_outliers.insert(demo.id);
      t.demos.push_back(std::move(demo));
    }
    d.tasks.push_back(std::move(t));
    ++in_object;
  }
  return d;
}

/// Family name encoded in a generated part id ("knob-0" -> "knob").
inline std::string family_of_part(const std::string& part_id) {
  return part_id.substr(0, part_id.find('-'));
}

}  // namespace mtransfer
