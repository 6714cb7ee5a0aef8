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

#include <algorithm>
#include <map>
#include <mutex>
#include <memory>
#include <optional>
#include <set>
#include <cstdio>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtransfer/dataset.hpp"
#include "mtransfer/error.hpp"
#include "mtransfer/eval.hpp"
#include "mtransfer/model.hpp"
#include "mtransfer/part_frame.hpp"
#include "mtransfer/trajectory.hpp"
#include "mtransfer/trajectory_io.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro
// that collides with Eigen parameter names.
#include <httplib.h>

namespace mtransfer {

struct ServiceOptions {
  std::size_t max_points_per_part = 50000;
  std::size_t default_samples_per_segment = 4;
  std::size_t max_samples_per_segment = 64;
  std::size_t default_top = 10;
};

/// Status code plus JSON body; the HTTP layer only copies these out.
struct Reply {
  int status = 200;
  nlohmann::json body;
};

inline Reply error_reply(int status, std::string_view code, const std::string& message,
                         const std::string& field = {}) {
  nlohmann::json e{{"code", code}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  return {status, {{"error", std::move(e)}}};
}

/// Machine-readable description of every endpoint and its payloads.
inline nlohmann::json api_description() {
  const nlohmann::json waypoint{{"g", "open | closed | holding"},
                                {"t", "[x, y, z] meters"},
                                {"r", "[x, y, z, w] unit quaternion"}};
  const nlohmann::json trajectory{{"id", "string"}, {"source", "crowd | expert | synthetic"},
                                  {"waypoints", {waypoint}}};
  const nlohmann::json error{{"error", {{"code", "string"}, {"message", "string"}, {"field", "string?"}}}};
  return {
      {"name", "mtransfer"},
      {"version", 1},
      {"frames", "Trajectories are exchanged in world coordinates unless a request sets frame=part."},
      {"error", error},
      {"endpoints",
       {{{"method", "GET"}, {"path", "/health"}, {"response", {{"status", "ok"}, {"tasks", "int"}, {"model", "bool"}}}},
        {{"method", "GET"}, {"path", "/api"}, {"response", "this document"}},
        {{"method", "GET"},
         {"path", "/tasks"},
         {"response",
          {{"tasks",
            {{{"id", "string"}, {"object", "string"}, {"manual", "string"}, {"part", "string"},
              {"instruction", "string"}, {"demos", "int"}, {"fold", "int?"}}}}}}},
        {{"method", "GET"},
         {"path", "/tasks/{id}"},
         {"response",
          {{"id", "string"},
           {"object", "string"},
           {"instruction", "string"},
           {"part", "string"},
           {"frame", {{"origin", "[x, y, z]"}, {"basis", "[x_axis, y_axis, z_axis]"}}},
           {"parts", {{{"id", "string"}, {"highlight", "bool"}, {"points", "[[x, y, z, r, g, b], ...]"}}}},
           {"demos", "[demo id, ...]"},
           {"seed", {{"task", "string"}, {"trajectory", trajectory}}}}},
         {"errors", {{"404", "not-found"}}}},
        {{"method", "GET"},
         {"path", "/tasks/{id}/demos/{demo}"},
         {"query", {{"frame", "world | part"}}},
         {"response", trajectory},
         {"errors", {{"404", "not-found"}}}},
        {{"method", "POST"},
         {"path", "/interpolate"},
         {"request", {{"waypoints", {waypoint}}, {"samples_per_segment", "int in [1, 64], default 4"}}},
         {"response", {{"waypoints", {waypoint}}}},
         {"errors", {{"400", "schema | invalid-argument"}}}},
        {{"method", "POST"},
         {"path", "/tasks/{id}/demos"},
         {"request", {{"waypoints", {waypoint}}, {"frame", "world | part, default world"}}},
         {"response", {{"id", "string"}, {"task", "string"}, {"demos", "int"}}},
         {"errors", {{"400", "schema"}, {"404", "not-found"}}}},
        {{"method", "POST"},
         {"path", "/tasks/{id}/score"},
         {"request", {{"top", "int, default 10"}}},
         {"response", {{"task", "string"}, {"ranking", {{{"id", "string"}, {"score", "number"}}}}}},
         {"errors", {{"404", "not-found"}, {"503", "model-unavailable"}}}}}}};
}

/// Backend for the demonstration editor. Reads run concurrently; each
/// submission is applied and persisted under an exclusive lock.
class DemoService {
 public:
  DemoService(Dataset dataset, std::string root, std::optional<TransferModel> model = std::nullopt,
              ServiceOptions options = {})
      : dataset_(std::move(dataset)),
        root_(std::move(root)),
        model_(std::move(model)),
        options_(options) {
    rebuild_index();
  }

  Reply health() const {
    std::shared_lock lock(mutex_);
    return {200, {{"status", "ok"}, {"tasks", dataset_.tasks.size()}, {"model", model_.has_value()}}};
  }

  Reply list_tasks() const {
    std::shared_lock lock(mutex_);
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : dataset_.tasks) {
      nlohmann::json j{{"id", t.id},
                       {"object", t.object_id},
                       {"manual", t.manual_id},
                       {"part", t.part->part_id},
                       {"instruction", t.instruction},
                       {"demos", t.demos.size()}};
      if (const auto f = fold_of(t.id)) j["fold"] = *f;
      tasks.push_back(std::move(j));
    }
    return {200, {{"tasks", std::move(tasks)}}};
  }

  Reply get_task(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const TaskInstance* task = dataset_.find_task(id);
    if (!task) return not_found("task", id);
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& part : object_parts(task->object_id)) {
      parts.push_back({{"id", part->part_id},
                       {"highlight", part->part_id == task->part->part_id},
                       {"points", to_json(downsample(*part, options_.max_points_per_part)).at("points")}});
    }
    nlohmann::json demos = nlohmann::json::array();
    for (const auto& d : task->demos) demos.push_back(d.id);
    nlohmann::json out{{"id", task->id},
                       {"object", task->object_id},
                       {"manual", task->manual_id},
                       {"instruction", task->instruction},
                       {"part", task->part->part_id},
                       {"frame", to_json(task->frame)},
                       {"parts", std::move(parts)},
                       {"demos", std::move(demos)},
                       {"seed", nullptr}};
    if (const auto f = fold_of(task->id)) out["fold"] = *f;
    if (const auto seed = seed_for(*task)) {
      out["seed"] = {{"task", seed->first},
                     {"trajectory", to_json(from_part_frame(seed->second, task->frame))}};
    }
    return {200, std::move(out)};
  }

  Reply get_demo(const std::string& task_id, const std::string& demo_id, const std::string& frame) const {
    std::shared_lock lock(mutex_);
    const TaskInstance* task = dataset_.find_task(task_id);
    if (!task) return not_found("task", task_id);
    if (frame != "world" && frame != "part") {
      return error_reply(400, to_string(ErrorCode::schema), "frame must be world or part", "frame");
    }
    for (const auto& d : task->demos) {
      if (d.id == demo_id) return {200, to_json(frame == "part" ? d : from_part_frame(d, task->frame))};
    }
    return not_found("demo", demo_id);
  }

  /// Stateless: the same interpolation the ranking engine uses.
  Reply interpolate_preview(const nlohmann::json& body) const {
    try {
      std::size_t spp = options_.default_samples_per_segment;
      if (body.is_object() && body.contains("samples_per_segment")) {
        const auto& s = body.at("samples_per_segment");
        if (!s.is_number_unsigned() || s.get<std::size_t>() == 0 ||
            s.get<std::size_t>() > options_.max_samples_per_segment) {
          return error_reply(400, to_string(ErrorCode::schema),
                             "expected integer in [1, " + std::to_string(options_.max_samples_per_segment) + "]",
                             "samples_per_segment");
        }
        spp = s.get<std::size_t>();
      }
      const Trajectory traj = parse_submission(body, "preview");
      const nlohmann::json full = to_json(interpolate(traj, spp));
      return {200, {{"waypoints", full.at("waypoints")}}};
    } catch (const SchemaError& e) {
      return error_reply(400, to_string(e.code()), e.what(), e.field());
    } catch (const Error& e) {
      return error_reply(400, to_string(e.code()), e.what());
    }
  }

  /// Validates, appends (source=crowd) and persists a demonstration.
  Reply submit_demo(const std::string& task_id, const nlohmann::json& body) {
    std::unique_lock lock(mutex_);
    TaskInstance* task = dataset_.find_task(task_id);
    if (!task) return not_found("task", task_id);
    std::string frame = "world";
    if (body.is_object() && body.contains("frame")) {
      if (!body.at("frame").is_string() ||
          (body.at("frame") != "world" && body.at("frame") != "part")) {
        return error_reply(400, to_string(ErrorCode::schema), "frame must be world or part", "frame");
      }
      frame = body.at("frame").get<std::string>();
    }
    Trajectory traj;
    try {
      traj = parse_submission(body, next_demo_id(*task));
    } catch (const SchemaError& e) {
      return error_reply(400, to_string(e.code()), e.what(), e.field());
    }
    traj.source = TrajectorySource::crowd;
    if (frame == "world") traj = to_part_frame(traj, task->frame);
    task->demos.push_back(traj);
    try {
      if (!root_.empty()) persist_demo(dataset_, root_, *task, traj);
    } catch (const std::exception& e) {
      task->demos.pop_back();
      return error_reply(500, to_string(ErrorCode::io), e.what());
    }
    demo_ids_.insert(traj.id);
    return {201, {{"id", traj.id}, {"task", task->id}, {"demos", task->demos.size()}}};
  }

  /// Ranks every demonstration of the other tasks for this task.
  Reply score(const std::string& task_id, const nlohmann::json& body) const {
    std::shared_lock lock(mutex_);
    if (!model_) {
      return error_reply(503, "model-unavailable", "no model checkpoint is loaded");
    }
    const TaskInstance* task = dataset_.find_task(task_id);
    if (!task) return not_found("task", task_id);
    std::size_t top = options_.default_top;
    if (body.is_object() && body.contains("top")) {
      if (!body.at("top").is_number_unsigned()) {
        return error_reply(400, to_string(ErrorCode::schema), "expected non-negative integer", "top");
      }
      top = body.at("top").get<std::size_t>();
    }
    std::vector<Trajectory> candidates;
    for (const auto& t : dataset_.tasks) {
      if (t.id != task->id) candidates.insert(candidates.end(), t.demos.begin(), t.demos.end());
    }
    if (candidates.empty()) return error_reply(409, to_string(ErrorCode::empty_pool), "no candidates");
    auto ranked = infer(*model_, *task->part, task->frame, task->instruction, candidates);
    if (top > 0 && ranked.size() > top) ranked.resize(top);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : ranked) out.push_back({{"id", r.id}, {"score", r.score}});
    return {200, {{"task", task->id}, {"ranking", std::move(out)}}};
  }

  /// Source task id and part-frame trajectory offered as the editing seed:
  /// a demo from the most similar task on another object, restricted to
  /// the requester's fold when folds are known.
  std::optional<std::pair<std::string, Trajectory>> seed_for(const TaskInstance& task) const {
    const auto fold = fold_of(task.id);
    std::vector<TaskInstance> eligible;
    for (const auto& t : dataset_.tasks) {
      if (t.object_id == task.object_id || t.demos.empty()) continue;
      if (fold && fold_of(t.id) != fold) continue;
      eligible.push_back(t);
    }
    if (eligible.empty()) return std::nullopt;
    std::size_t best = 0;
    try {
      best = TaskSimilarity(eligible).nearest(task);
    } catch (const Error&) {
      best = 0;  // no usable words: fall back to the first eligible task
    }
    const auto& src = eligible[best];
    const auto it = std::min_element(src.demos.begin(), src.demos.end(),
                                     [](const Trajectory& a, const Trajectory& b) { return a.id < b.id; });
    return std::make_pair(src.id, *it);
  }

  std::optional<int> fold_of(const std::string& task_id) const {
    const auto it = dataset_.folds.find(task_id);
    if (it == dataset_.folds.end()) return std::nullopt;
    return it->second;
  }

  /// Snapshot of the current dataset (copies under a shared lock).
  Dataset dataset() const {
    std::shared_lock lock(mutex_);
    return dataset_;
  }

  /// Registers all routes on `server`.
  void mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    auto parse = [](const httplib::Request& req) -> std::optional<nlohmann::json> {
      if (req.body.empty()) return nlohmann::json::object();
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded()) return std::nullopt;
      return j;
    };
    const Reply bad_json = error_reply(400, to_string(ErrorCode::schema), "request body is not valid JSON");

    server.Get("/health", [=, this](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server.Get("/api", [=, this](const httplib::Request&, httplib::Response& res) {
      send(res, {200, api_description()});
    });
    server.Get("/tasks", [=, this](const httplib::Request&, httplib::Response& res) { send(res, list_tasks()); });
    server.Get(R"(/tasks/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_task(req.matches[1]));
    });
    server.Get(R"(/tasks/([^/]+)/demos/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
      const std::string frame = req.has_param("frame") ? req.get_param_value("frame") : "world";
      send(res, get_demo(req.matches[1], req.matches[2], frame));
    });
    server.Post("/interpolate", [=, this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse(req);
      send(res, body ? interpolate_preview(*body) : bad_json);
    });
    server.Post(R"(/tasks/([^/]+)/demos)", [=, this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse(req);
      send(res, body ? submit_demo(req.matches[1], *body) : bad_json);
    });
    server.Post(R"(/tasks/([^/]+)/score)", [=, this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse(req);
      send(res, body ? score(req.matches[1], *body) : bad_json);
    });
  }

 private:
  static Reply not_found(const std::string& what, const std::string& id) {
    return error_reply(404, to_string(ErrorCode::not_found), "unknown " + what + " '" + id + "'");
  }

  static Trajectory parse_submission(const nlohmann::json& body, const std::string& id) {
    if (!body.is_object()) throw SchemaError("", "", "request body must be an object");
    nlohmann::json doc{{"id", id}, {"source", "crowd"}};
    if (body.contains("waypoints")) doc["waypoints"] = body.at("waypoints");
    return trajectory_from_json(doc);
  }

  std::vector<std::shared_ptr<const PointCloudPart>> object_parts(const std::string& object_id) const {
    std::vector<std::shared_ptr<const PointCloudPart>> parts;
    for (const auto& t : dataset_.tasks) {
      if (t.object_id != object_id) continue;
      const bool seen = std::any_of(parts.begin(), parts.end(),
                                    [&](const auto& p) { return p->part_id == t.part->part_id; });
      if (!seen) parts.push_back(t.part);
    }
    return parts;
  }

  std::string next_demo_id(const TaskInstance& task) const {
    for (std::size_t k = task.demos.size();; ++k) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "-c%03zu", k);
      std::string id = task.id + buf;
      if (!demo_ids_.count(id)) return id;
    }
  }

  void rebuild_index() {
    demo_ids_.clear();
    for (const auto& t : dataset_.tasks) {
      for (const auto& d : t.demos) demo_ids_.insert(d.id);
      if (t.expert_demo) demo_ids_.insert(t.expert_demo->id);
    }
  }

  mutable std::shared_mutex mutex_;
  Dataset dataset_;
  std::string root_;
  std::optional<TransferModel> model_;
  ServiceOptions options_;
  std::set<std::string> demo_ids_;
};

}  // namespace mtransfer
