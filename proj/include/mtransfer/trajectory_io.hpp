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

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

#include "mtransfer/error.hpp"
#include "mtransfer/trajectory.hpp"

namespace mtransfer {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& file,
                           const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(file, path.empty() ? key : path + "." + key, "missing field");
  }
  return j.at(key);
}

template <int N>
Eigen::Matrix<double, N, 1> read_vector(const json& j, const std::string& file,
                                        const std::string& path) {
  if (!j.is_array() || j.size() != N) {
    throw SchemaError(file, path, "expected array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw SchemaError(file, path, "expected number");
    v(i) = j[i].get<double>();
    if (!std::isfinite(v(i))) throw SchemaError(file, path, "non-finite value");
  }
  return v;
}

}  // namespace detail

inline json to_json(const Waypoint& w) {
  return json{{"g", to_string(w.gripper)},
              {"t", {w.translation.x(), w.translation.y(), w.translation.z()}},
              {"r", {w.rotation.x(), w.rotation.y(), w.rotation.z(), w.rotation.w()}}};
}

inline json to_json(const Trajectory& t) {
  json wps = json::array();
  for (const auto& w : t.waypoints) wps.push_back(to_json(w));
  return json{{"id", t.id}, {"source", to_string(t.source)}, {"waypoints", std::move(wps)}};
}

inline Waypoint waypoint_from_json(const json& j, const std::string& file,
                                   const std::string& path) {
  const json& g = detail::require(j, "g", file, path);
  if (!g.is_string()) throw SchemaError(file, path + ".g", "expected string");
  const auto state = parse_gripper(g.get<std::string>());
  if (!state) {
    throw SchemaError(file, path + ".g", "expected one of open/closed/holding");
  }
  const Eigen::Vector3d t =
      detail::read_vector<3>(detail::require(j, "t", file, path), file, path + ".t");
  const Eigen::Vector4d r =
      detail::read_vector<4>(detail::require(j, "r", file, path), file, path + ".r");
  try {
    return Waypoint::make(*state, t, Eigen::Quaterniond(r(3), r(0), r(1), r(2)));
  } catch (const Error& e) {
    throw SchemaError(file, path + ".r", e.what());
  }
}

/// Parses the canonical trajectory document. Field paths in errors look like
/// "waypoints[3].r".
inline Trajectory trajectory_from_json(const json& j, const std::string& file = {}) {
  if (!j.is_object()) throw SchemaError(file, "", "trajectory must be an object");
  Trajectory out;
  const json& id = detail::require(j, "id", file, "");
  if (!id.is_string()) throw SchemaError(file, "id", "expected string");
  out.id = id.get<std::string>();
  if (j.contains("source")) {
    const auto src = j.at("source").is_string()
                         ? parse_source(j.at("source").get<std::string>())
                         : std::nullopt;
    if (!src) throw SchemaError(file, "source", "expected crowd/expert/synthetic");
    out.source = *src;
  }
  const json& wps = detail::require(j, "waypoints", file, "");
  if (!wps.is_array() || wps.empty()) {
    throw SchemaError(file, "waypoints", "expected non-empty array");
  }
  out.waypoints.reserve(wps.size());
  for (std::size_t i = 0; i < wps.size(); ++i) {
    out.waypoints.push_back(
        waypoint_from_json(wps[i], file, "waypoints[" + std::to_string(i) + "]"));
  }
  return out;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path, "", std::string("malformed JSON: ") + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out << j.dump(1) << '\n';
}

inline Trajectory load_trajectory(const std::string& path) {
  return trajectory_from_json(read_json_file(path), path);
}

}  // namespace mtransfer
