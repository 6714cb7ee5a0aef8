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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mtransfer/error.hpp"
#include "mtransfer/hash.hpp"
#include "mtransfer/part_frame.hpp"
#include "mtransfer/stop_words.hpp"
#include "mtransfer/trajectory.hpp"

namespace mtransfer {

inline constexpr int kGridSide = 10;
inline constexpr int kGridCells = kGridSide * kGridSide * kGridSide;
inline constexpr double kFineCellSize = 0.01;
inline constexpr double kCoarseCellSize = 0.025;
inline constexpr std::size_t kPointCloudFeatureSize = 2 * kGridCells;
inline constexpr std::size_t kWaypointFeatureSize = 8;

/// 10x10x10 binary occupancy grid centered on the part-frame origin. Cell
/// index i along an axis spans [(i - 5) * s, (i - 4) * s).
struct OccupancyGrid {
  double cell_size = kFineCellSize;
  std::vector<std::uint8_t> cells = std::vector<std::uint8_t>(kGridCells, 0);

  static constexpr int index(int ix, int iy, int iz) {
    return (ix * kGridSide + iy) * kGridSide + iz;
  }
  bool at(int ix, int iy, int iz) const { return cells[index(ix, iy, iz)] != 0; }
  std::size_t occupied() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
  }
};

inline OccupancyGrid voxelize(const PointCloudPart& part, const PartFrame& frame,
                              double cell_size) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::invalid_argument, "cell size must be positive");
  OccupancyGrid grid;
  grid.cell_size = cell_size;
  for (const auto& p : part.points) {
    const Eigen::Vector3d local = frame.to_local(p.position);
    int idx[3];
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const double c = std::floor(local(a) / cell_size) + kGridSide / 2;
      if (!(c >= 0.0 && c < kGridSide)) {
        inside = false;
        break;
      }
      idx[a] = static_cast<int>(c);
    }
    if (inside) grid.cells[OccupancyGrid::index(idx[0], idx[1], idx[2])] = 1;
  }
  return grid;
}

/// Both grids flattened, fine grid first.
inline Eigen::VectorXd point_cloud_features(const PointCloudPart& part, const PartFrame& frame) {
  Eigen::VectorXd out(kPointCloudFeatureSize);
  const auto fine = voxelize(part, frame, kFineCellSize);
  const auto coarse = voxelize(part, frame, kCoarseCellSize);
  for (int i = 0; i < kGridCells; ++i) {
    out(i) = fine.cells[i];
    out(kGridCells + i) = coarse.cells[i];
  }
  return out;
}

/// Lowercased ASCII alphanumeric tokens; everything else separates.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 128 && std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Reads a word list: one token per line, '#' lines are comments. A
/// "# id <hex>" line, when present, must match the content hash.
inline std::vector<std::string> read_word_list(const std::string& path,
                                               std::string* id_out = nullptr);

/// Frozen, sorted token list. The id is a hash of the content.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
    Fnv1a h;
    for (const auto& t : tokens_) {
      h.update(t).update("\n");
      index_.emplace(t, index_.size());
    }
    id_ = h.hex();
  }

  static Vocabulary build(const std::vector<std::string>& corpus,
                          const std::set<std::string>& stop_words = default_stop_words()) {
    std::set<std::string> words;
    for (const auto& instr : corpus) {
      for (auto& t : tokenize(instr)) {
        if (!stop_words.count(t)) words.insert(std::move(t));
      }
    }
    if (words.empty()) {
      throw Error(ErrorCode::empty_vocabulary, "corpus yields no vocabulary tokens");
    }
    return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
  }

  static Vocabulary load(const std::string& path) {
    std::string id;
    Vocabulary v(read_word_list(path, &id));
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path);
    out << "# id " << id_ << '\n';
    for (const auto& t : tokens_) out << t << '\n';
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& id() const { return id_; }

  /// Index of `token` or -1.
  long find(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? -1 : static_cast<long>(it->second);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
  std::string id_ = Fnv1a{}.hex();
};

inline std::vector<std::string> read_word_list(const std::string& path, std::string* id_out) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::vector<std::string> words;
  std::string declared;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# id ", 0) == 0) declared = line.substr(5);
      continue;
    }
    words.push_back(line);
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  Fnv1a h;
  for (const auto& w : words) h.update(w).update("\n");
  if (!declared.empty() && declared != h.hex()) {
    throw Error(ErrorCode::schema, path + ": id " + declared + " does not match content " + h.hex());
  }
  if (id_out) *id_out = h.hex();
  return words;
}

inline std::set<std::string> load_stop_words(const std::string& path) {
  const auto words = read_word_list(path);
  return {words.begin(), words.end()};
}

struct BagOfWords {
  std::vector<double> counts;
  std::string vocab_id;
};

/// Counts in-vocabulary tokens; unknown tokens are dropped.
inline BagOfWords embed_language(std::string_view instruction, const Vocabulary& vocab) {
  BagOfWords bow{std::vector<double>(vocab.size(), 0.0), vocab.id()};
  for (const auto& t : tokenize(instruction)) {
    const long i = vocab.find(t);
    if (i >= 0) bow.counts[static_cast<std::size_t>(i)] += 1.0;
  }
  return bow;
}

/// Trajectory featurization settings.
struct TrajectoryEncoding {
  std::size_t target_len = 15;
  std::size_t samples_per_segment = 4;

  std::size_t feature_size() const { return target_len * kWaypointFeatureSize; }
};

/// Smooths, length-normalizes and flattens a trajectory that is already in
/// its part frame: per waypoint (gripper ordinal, tx, ty, tz, rx, ry, rz, rw).
inline Eigen::VectorXd embed_part_trajectory(const Trajectory& traj, const TrajectoryEncoding& enc) {
  const Trajectory smooth = traj.size() >= 2 ? interpolate(traj, enc.samples_per_segment) : traj;
  const Trajectory fixed = normalize_length(smooth, enc.target_len);
  Eigen::VectorXd out(enc.feature_size());
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    const Waypoint& w = fixed.waypoints[i];
    // Quaternion sign is arbitrary; pick w >= 0 so equal rotations encode equally.
    const double sign = w.rotation.w() < 0.0 ? -1.0 : 1.0;
    const auto k = static_cast<Eigen::Index>(i * kWaypointFeatureSize);
    out(k) = gripper_ordinal(w.gripper);
    out.segment<3>(k + 1) = w.translation;
    out(k + 4) = sign * w.rotation.x();
    out(k + 5) = sign * w.rotation.y();
    out(k + 6) = sign * w.rotation.z();
    out(k + 7) = sign * w.rotation.w();
  }
  return out;
}

/// World-frame variant: expresses the trajectory in `frame` first.
inline Eigen::VectorXd embed_trajectory(const Trajectory& traj, const PartFrame& frame,
                                        const TrajectoryEncoding& enc) {
  return embed_part_trajectory(to_part_frame(traj, frame), enc);
}

/// Network input for one (part, instruction, trajectory) triple.
struct FeatureVector {
  Eigen::VectorXd pc;
  Eigen::VectorXd lang;
  Eigen::VectorXd traj;
};

inline Eigen::VectorXd to_vector(const BagOfWords& bow) {
  return Eigen::Map<const Eigen::VectorXd>(bow.counts.data(),
                                           static_cast<Eigen::Index>(bow.counts.size()));
}

}  // namespace mtransfer
