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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtransfer/error.hpp"
#include "mtransfer/features.hpp"
#include "mtransfer/hash.hpp"
#include "mtransfer/part_frame.hpp"
#include "mtransfer/task.hpp"
#include "mtransfer/trajectory_io.hpp"

namespace mtransfer {

inline constexpr int kDatasetVersion = 1;
inline constexpr const char* kDatasetFormat = "mtransfer-dataset";

struct DatasetMetadata {
  std::string name = "dataset";
  int version = kDatasetVersion;
  std::string created;
};

struct DatasetCounts {
  std::size_t objects = 0;
  std::size_t parts = 0;
  std::size_t manuals = 0;
  std::size_t instructions = 0;
  std::size_t demos = 0;
};

/// Tasks with their part clouds and demonstrations (part frame in memory).
struct Dataset {
  DatasetMetadata meta;
  std::vector<TaskInstance> tasks;
  std::optional<Vocabulary> vocab;
  // Optional fold assignment (task id -> fold) used by the demo service.
  std::map<std::string, int> folds;
  // Ids of deliberately corrupted demos in generated datasets.
  std::set<std::string> synthetic_outliers;

  DatasetCounts counts() const {
    std::set<std::string> objects, parts, manuals;
    DatasetCounts c;
    for (const auto& t : tasks) {
      objects.insert(t.object_id);
      parts.insert(t.object_id + "/" + t.part->part_id);
      manuals.insert(t.manual_id);
      c.demos += t.demos.size();
    }
    c.objects = objects.size();
    c.parts = parts.size();
    c.manuals = manuals.size();
    c.instructions = tasks.size();
    return c;
  }

  const TaskInstance* find_task(const std::string& id) const {
    for (const auto& t : tasks) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
  TaskInstance* find_task(const std::string& id) {
    for (auto& t : tasks) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
};

inline nlohmann::json to_json(const PartFrame& f) {
  nlohmann::json basis = nlohmann::json::array();
  for (int c = 0; c < 3; ++c) basis.push_back({f.basis(0, c), f.basis(1, c), f.basis(2, c)});
  return {{"origin", {f.origin.x(), f.origin.y(), f.origin.z()}}, {"basis", basis}};
}

/// "basis" lists the x, y and z axes of the part frame in world coordinates.
inline PartFrame frame_from_json(const nlohmann::json& j, const std::string& file,
                                 const std::string& path) {
  PartFrame f;
  f.origin = detail::read_vector<3>(detail::require(j, "origin", file, path), file, path + ".origin");
  const auto& basis = detail::require(j, "basis", file, path);
  if (!basis.is_array() || basis.size() != 3) {
    throw SchemaError(file, path + ".basis", "expected three axes");
  }
  for (int c = 0; c < 3; ++c) {
    f.basis.col(c) = detail::read_vector<3>(basis[static_cast<std::size_t>(c)], file,
                                            path + ".basis[" + std::to_string(c) + "]");
  }
  try {
    validate_frame(f);
  } catch (const Error& e) {
    throw SchemaError(file, path + ".basis", e.what());
  }
  return f;
}

inline nlohmann::json to_json(const PointCloudPart& part) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : part.points) {
    pts.push_back({p.position.x(), p.position.y(), p.position.z(), p.color[0], p.color[1], p.color[2]});
  }
  return {{"id", part.part_id}, {"points", std::move(pts)}};
}

inline PointCloudPart part_from_json(const nlohmann::json& j, const std::string& file) {
  PointCloudPart part;
  const auto& id = detail::require(j, "id", file, "");
  if (!id.is_string()) throw SchemaError(file, "id", "expected string");
  part.part_id = id.get<std::string>();
  const auto& pts = detail::require(j, "points", file, "");
  if (!pts.is_array() || pts.size() < 3) throw SchemaError(file, "points", "need at least 3 points");
  part.points.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string path = "points[" + std::to_string(i) + "]";
    const auto& p = pts[i];
    if (!p.is_array() || p.size() != 6) throw SchemaError(file, path, "expected [x,y,z,r,g,b]");
    ColoredPoint cp;
    for (int a = 0; a < 6; ++a) {
      if (!p[static_cast<std::size_t>(a)].is_number()) throw SchemaError(file, path, "expected numbers");
      const double v = p[static_cast<std::size_t>(a)].get<double>();
      if (!std::isfinite(v)) throw SchemaError(file, path, "non-finite value");
      if (a < 3) {
        cp.position(a) = v;
      } else {
        if (v < 0.0 || v > 255.0) throw SchemaError(file, path, "color outside [0, 255]");
        cp.color[static_cast<std::size_t>(a - 3)] = static_cast<std::uint8_t>(v);
      }
    }
    part.points.push_back(cp);
  }
  return part;
}

/// Deterministic stride subsampling to at most `max_points` points.
inline PointCloudPart downsample(const PointCloudPart& part, std::size_t max_points = 50000) {
  if (part.points.size() <= max_points || max_points == 0) return part;
  const std::size_t stride = (part.points.size() + max_points - 1) / max_points;
  PointCloudPart out{part.part_id, {}};
  for (std::size_t i = 0; i < part.points.size(); i += stride) out.points.push_back(part.points[i]);
  return out;
}

enum class TrajectoryFrame { part, world };

namespace detail {

namespace fs = std::filesystem;

inline std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

inline nlohmann::json manual_json(const Dataset& d, const std::string& object_id) {
  nlohmann::json manuals = nlohmann::json::array();
  std::map<std::string, nlohmann::json> by_manual;
  std::vector<std::string> order;
  for (const auto& t : d.tasks) {
    if (t.object_id != object_id) continue;
    if (!by_manual.count(t.manual_id)) {
      order.push_back(t.manual_id);
      by_manual[t.manual_id] = {{"id", t.manual_id}, {"instructions", nlohmann::json::array()}};
    }
    nlohmann::json demos = nlohmann::json::array();
    for (const auto& demo : t.demos) demos.push_back(demo.id);
    by_manual[t.manual_id]["instructions"].push_back(
        {{"task", t.id},
         {"part", t.part->part_id},
         {"text", t.instruction},
         {"demos", std::move(demos)},
         {"expert", t.expert_demo ? nlohmann::json(t.expert_demo->id) : nlohmann::json(nullptr)}});
  }
  for (const auto& m : order) manuals.push_back(std::move(by_manual[m]));
  return {{"object", object_id}, {"manuals", std::move(manuals)}};
}

inline nlohmann::json dataset_header(const Dataset& d, TrajectoryFrame frame) {
  const auto c = d.counts();
  nlohmann::json j{{"format", kDatasetFormat},
                   {"version", d.meta.version},
                   {"name", d.meta.name},
                   {"created", d.meta.created},
                   {"trajectory_frame", frame == TrajectoryFrame::part ? "part" : "world"},
                   {"counts",
                    {{"objects", c.objects},
                     {"parts", c.parts},
                     {"manuals", c.manuals},
                     {"instructions", c.instructions},
                     {"demos", c.demos}}}};
  if (!d.folds.empty()) j["folds"] = d.folds;
  if (!d.synthetic_outliers.empty()) j["synthetic_outliers"] = d.synthetic_outliers;
  return j;
}

inline Trajectory stored_form(const Trajectory& part_traj, const PartFrame& frame, TrajectoryFrame f) {
  return f == TrajectoryFrame::part ? part_traj : from_part_frame(part_traj, frame);
}

}  // namespace detail

/// Writes the directory layout:
///   dataset.json                      header, counts, optional folds
///   vocab.txt                         optional vocabulary
///   objects/<object>/part_<part>.json points and frame
///   objects/<object>/manual.json      manuals, instructions, demo ids
///   objects/<object>/demos/<id>.json  trajectories
inline void export_dataset(const Dataset& d, const std::string& root,
                           TrajectoryFrame frame = TrajectoryFrame::part) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  std::map<std::string, std::set<std::string>> written_parts;
  std::set<std::string> objects;
  for (const auto& t : d.tasks) {
    const fs::path obj = fs::path(root) / "objects" / detail::safe_name(t.object_id);
    fs::create_directories(obj / "demos");
    objects.insert(t.object_id);
    if (written_parts[t.object_id].insert(t.part->part_id).second) {
      auto j = to_json(*t.part);
      j["frame"] = to_json(t.frame);
      write_json_file((obj / ("part_" + detail::safe_name(t.part->part_id) + ".json")).string(), j);
    }
    for (const auto& demo : t.demos) {
      write_json_file((obj / "demos" / (detail::safe_name(demo.id) + ".json")).string(),
                      to_json(detail::stored_form(demo, t.frame, frame)));
    }
    if (t.expert_demo) {
      write_json_file((obj / "demos" / (detail::safe_name(t.expert_demo->id) + ".json")).string(),
                      to_json(detail::stored_form(*t.expert_demo, t.frame, frame)));
    }
  }
  for (const auto& o : objects) {
    write_json_file((fs::path(root) / "objects" / detail::safe_name(o) / "manual.json").string(),
                    detail::manual_json(d, o));
  }
  write_json_file((fs::path(root) / "dataset.json").string(), detail::dataset_header(d, frame));
  if (d.vocab) d.vocab->save((fs::path(root) / "vocab.txt").string());
}

/// Loads and validates a dataset directory. Trajectories are converted to
/// their part frames; frames missing from part files are computed.
inline Dataset import_dataset(const std::string& root,
                              const Eigen::Vector3d& gravity = -Eigen::Vector3d::UnitZ()) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorCode::io, root + " is not a directory");
  Dataset d;
  TrajectoryFrame stored = TrajectoryFrame::world;
  const fs::path header_path = fs::path(root) / "dataset.json";
  if (fs::exists(header_path)) {
    const auto h = read_json_file(header_path.string());
    const std::string file = header_path.string();
    if (!h.is_object()) throw SchemaError(file, "", "expected object");
    if (h.contains("format") && h["format"] != kDatasetFormat) {
      throw SchemaError(file, "format", "unknown dataset format");
    }
    d.meta.name = h.value("name", d.meta.name);
    d.meta.version = h.value("version", kDatasetVersion);
    if (d.meta.version != kDatasetVersion) {
      throw SchemaError(file, "version", "unsupported dataset version");
    }
    d.meta.created = h.value("created", std::string{});
    const std::string tf = h.value("trajectory_frame", std::string("world"));
    if (tf != "world" && tf != "part") throw SchemaError(file, "trajectory_frame", "expected world or part");
    stored = tf == "part" ? TrajectoryFrame::part : TrajectoryFrame::world;
    if (h.contains("folds")) d.folds = h["folds"].get<std::map<std::string, int>>();
    if (h.contains("synthetic_outliers")) {
      d.synthetic_outliers = h["synthetic_outliers"].get<std::set<std::string>>();
    }
  }
  const fs::path objects = fs::path(root) / "objects";
  if (!fs::is_directory(objects)) throw Error(ErrorCode::empty_dataset, root + " contains no objects");

  std::vector<fs::path> object_dirs;
  for (const auto& e : fs::directory_iterator(objects)) {
    if (e.is_directory()) object_dirs.push_back(e.path());
  }
  std::sort(object_dirs.begin(), object_dirs.end());
  std::set<std::string> task_ids, traj_ids;

  for (const auto& dir : object_dirs) {
    const fs::path manual_path = dir / "manual.json";
    if (!fs::exists(manual_path)) continue;
    const std::string mfile = manual_path.string();
    const auto m = read_json_file(mfile);
    const auto& obj = detail::require(m, "object", mfile, "");
    if (!obj.is_string()) throw SchemaError(mfile, "object", "expected string");
    const std::string object_id = obj.get<std::string>();

    std::map<std::string, std::pair<std::shared_ptr<const PointCloudPart>, PartFrame>> parts;
    auto load_part = [&](const std::string& part_id) {
      auto it = parts.find(part_id);
      if (it != parts.end()) return it->second;
      const fs::path p = dir / ("part_" + detail::safe_name(part_id) + ".json");
      if (!fs::exists(p)) {
        throw Error(ErrorCode::referential_integrity,
                    mfile + ": part '" + part_id + "' has no file " + p.string());
      }
      const auto j = read_json_file(p.string());
      auto part = std::make_shared<const PointCloudPart>(part_from_json(j, p.string()));
      if (part->part_id != part_id) {
        throw Error(ErrorCode::referential_integrity, p.string() + ": id does not match '" + part_id + "'");
      }
      const PartFrame frame = j.contains("frame") ? frame_from_json(j["frame"], p.string(), "frame")
                                                  : compute_part_frame(*part, gravity);
      return parts.emplace(part_id, std::make_pair(part, frame)).first->second;
    };
    auto load_demo = [&](const std::string& id, const PartFrame& frame) {
      const fs::path p = dir / "demos" / (detail::safe_name(id) + ".json");
      if (!fs::exists(p)) {
        throw Error(ErrorCode::referential_integrity, mfile + ": demo '" + id + "' has no file " + p.string());
      }
      Trajectory t = load_trajectory(p.string());
      if (t.id != id) {
        throw Error(ErrorCode::referential_integrity, p.string() + ": id does not match '" + id + "'");
      }
      if (!traj_ids.insert(id).second) {
        throw Error(ErrorCode::referential_integrity, "trajectory id '" + id + "' is used twice");
      }
      return stored == TrajectoryFrame::part ? t : to_part_frame(t, frame);
    };

    const auto& manuals = detail::require(m, "manuals", mfile, "");
    if (!manuals.is_array()) throw SchemaError(mfile, "manuals", "expected array");
    for (std::size_t mi = 0; mi < manuals.size(); ++mi) {
      const std::string mpath = "manuals[" + std::to_string(mi) + "]";
      const auto& man = manuals[mi];
      const auto& mid = detail::require(man, "id", mfile, mpath);
      if (!mid.is_string()) throw SchemaError(mfile, mpath + ".id", "expected string");
      const auto& instr = detail::require(man, "instructions", mfile, mpath);
      if (!instr.is_array()) throw SchemaError(mfile, mpath + ".instructions", "expected array");
      for (std::size_t ii = 0; ii < instr.size(); ++ii) {
        const std::string ipath = mpath + ".instructions[" + std::to_string(ii) + "]";
        const auto& in = instr[ii];
        TaskInstance t;
        t.object_id = object_id;
        t.manual_id = mid.get<std::string>();
        for (const char* key : {"task", "part", "text"}) {
          if (!detail::require(in, key, mfile, ipath).is_string()) {
            throw SchemaError(mfile, ipath + "." + key, "expected string");
          }
        }
        t.id = in["task"].get<std::string>();
        if (!task_ids.insert(t.id).second) {
          throw Error(ErrorCode::referential_integrity, mfile + ": task id '" + t.id + "' is used twice");
        }
        t.instruction = in["text"].get<std::string>();
        const auto [part, frame] = load_part(in["part"].get<std::string>());
        t.part = part;
        t.frame = frame;
        if (in.contains("demos")) {
          if (!in["demos"].is_array()) throw SchemaError(mfile, ipath + ".demos", "expected array");
          for (const auto& id : in["demos"]) {
            if (!id.is_string()) throw SchemaError(mfile, ipath + ".demos", "expected ids");
            t.demos.push_back(load_demo(id.get<std::string>(), frame));
          }
        }
        if (in.contains("expert") && !in["expert"].is_null()) {
          if (!in["expert"].is_string()) throw SchemaError(mfile, ipath + ".expert", "expected id");
          t.expert_demo = load_demo(in["expert"].get<std::string>(), frame);
        }
        d.tasks.push_back(std::move(t));
      }
    }
  }
  if (d.tasks.empty()) throw Error(ErrorCode::empty_dataset, root + " contains no tasks");
  const fs::path vocab = fs::path(root) / "vocab.txt";
  if (fs::exists(vocab)) d.vocab = Vocabulary::load(vocab.string());
  for (const auto& [task, fold] : d.folds) {
    if (!task_ids.count(task)) {
      throw Error(ErrorCode::referential_integrity, "fold assignment names unknown task '" + task + "'");
    }
  }
  return d;
}

/// Content hash over tasks, parts, frames and trajectories. Metadata such as
/// the creation time is excluded.
inline std::string dataset_hash(const Dataset& d) {
  Fnv1a h;
  for (const auto& t : d.tasks) {
    nlohmann::json j{{"id", t.id}, {"object", t.object_id}, {"manual", t.manual_id},
                     {"instruction", t.instruction}, {"part", to_json(*t.part)},
                     {"frame", to_json(t.frame)}};
    nlohmann::json demos = nlohmann::json::array();
    for (const auto& demo : t.demos) demos.push_back(to_json(demo));
    j["demos"] = std::move(demos);
    if (t.expert_demo) j["expert"] = to_json(*t.expert_demo);
    h.update(j.dump());
  }
  return h.hex();
}

inline bool operator==(const TaskInstance& a, const TaskInstance& b) {
  return a.id == b.id && a.object_id == b.object_id && a.manual_id == b.manual_id &&
         a.instruction == b.instruction && *a.part == *b.part && a.frame == b.frame &&
         a.demos == b.demos && a.expert_demo == b.expert_demo;
}

/// Persists one newly submitted demo: its file plus the owning object's
/// manual and the dataset header.
inline void persist_demo(const Dataset& d, const std::string& root, const TaskInstance& task,
                         const Trajectory& part_traj) {
  namespace fs = std::filesystem;
  TrajectoryFrame stored = TrajectoryFrame::world;
  const fs::path header = fs::path(root) / "dataset.json";
  if (fs::exists(header)) {
    stored = read_json_file(header.string()).value("trajectory_frame", std::string("world")) == "part"
                 ? TrajectoryFrame::part
                 : TrajectoryFrame::world;
  }
  const fs::path obj = fs::path(root) / "objects" / detail::safe_name(task.object_id);
  fs::create_directories(obj / "demos");
  write_json_file((obj / "demos" / (detail::safe_name(part_traj.id) + ".json")).string(),
                  to_json(detail::stored_form(part_traj, task.frame, stored)));
  write_json_file((obj / "manual.json").string(), detail::manual_json(d, task.object_id));
  write_json_file(header.string(), detail::dataset_header(d, stored));
}

}  // namespace mtransfer
