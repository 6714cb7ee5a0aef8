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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtransfer/config.hpp"
#include "mtransfer/error.hpp"
#include "mtransfer/hash.hpp"
#include "mtransfer/model.hpp"
#include "mtransfer/trajectory_io.hpp"

namespace mtransfer {

inline constexpr const char* kCheckpointFormat = "mtransfer-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// JSON checkpoint: config, featurization, vocabulary and every block's
/// weights (row-major) and bias, sealed with a content hash.
inline nlohmann::json checkpoint_json(const TransferModel& m) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : m.net.blocks()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(b.weight.size()));
    for (Eigen::Index r = 0; r < b.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.weight.cols(); ++c) w.push_back(b.weight(r, c));
    }
    blocks.push_back({{"name", b.name},
                      {"rows", b.weight.rows()},
                      {"cols", b.weight.cols()},
                      {"weight", std::move(w)},
                      {"bias", std::vector<double>(b.bias.data(), b.bias.data() + b.bias.size())}});
  }
  const auto& in = m.net.inputs();
  nlohmann::json j{{"format", kCheckpointFormat},
                   {"version", kCheckpointVersion},
                   {"config", to_json(m.net.config())},
                   {"encoding", to_json(m.encoding)},
                   {"inputs", {{"pc", in.pc}, {"lang", in.lang}, {"traj", in.traj}}},
                   {"vocab_id", m.vocab.id()},
                   {"vocab", m.vocab.tokens()},
                   {"blocks", std::move(blocks)}};
  j["hash"] = fnv1a_hex(j.dump());
  return j;
}

namespace detail {

inline TransferModel checkpoint_body(const nlohmann::json& j, const std::string& file) {
  TransferModel m;
  m.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
  if (m.vocab.id() != j.at("vocab_id").get<std::string>()) {
    throw SchemaError(file, "vocab_id", "vocabulary does not match its id");
  }
  read_encoding(detail::Reader(j.at("encoding"), file, "encoding"), m.encoding);
  NetConfig config;
  read_net(detail::Reader(j.at("config"), file, "config"), config);
  const auto& in = j.at("inputs");
  const InputDims dims{in.at("pc").get<std::size_t>(), in.at("lang").get<std::size_t>(),
                       in.at("traj").get<std::size_t>()};
  if (dims.pc != kPointCloudFeatureSize || dims.lang != m.vocab.size() ||
      dims.traj != m.encoding.feature_size()) {
    throw Error(ErrorCode::shape_mismatch,
                file + ": checkpoint input dims do not match its vocabulary/encoding");
  }
  m.net = MultimodalNet(dims, config);
  const auto& blocks = j.at("blocks");
  if (blocks.size() != m.net.blocks().size()) {
    throw Error(ErrorCode::shape_mismatch, file + ": block count does not match the architecture");
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    Block& b = m.net.blocks()[k];
    const auto& jb = blocks[k];
    const auto w = jb.at("weight").get<std::vector<double>>();
    const auto bias = jb.at("bias").get<std::vector<double>>();
    if (jb.at("name").get<std::string>() != b.name || jb.at("rows").get<Eigen::Index>() != b.weight.rows() ||
        jb.at("cols").get<Eigen::Index>() != b.weight.cols() ||
        w.size() != static_cast<std::size_t>(b.weight.size()) ||
        bias.size() != static_cast<std::size_t>(b.bias.size())) {
      throw Error(ErrorCode::shape_mismatch, file + ": block '" + b.name + "' has wrong dimensions");
    }
    for (Eigen::Index r = 0, i = 0; r < b.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.weight.cols(); ++c) b.weight(r, c) = w[static_cast<std::size_t>(i++)];
    }
    for (std::size_t i = 0; i < bias.size(); ++i) b.bias(static_cast<Eigen::Index>(i)) = bias[i];
  }
  return m;
}

}  // namespace detail

inline TransferModel model_from_checkpoint(const nlohmann::json& j, const std::string& file = {}) {
  if (!j.is_object() || j.value("format", std::string{}) != kCheckpointFormat) {
    throw SchemaError(file, "format", "not a model checkpoint");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw SchemaError(file, "version", "unsupported checkpoint version");
  }
  nlohmann::json body = j;
  body.erase("hash");
  if (j.value("hash", std::string{}) != fnv1a_hex(body.dump())) {
    throw SchemaError(file, "hash", "checkpoint content hash mismatch");
  }
  try {
    return detail::checkpoint_body(j, file);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(file, "", std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_model(const TransferModel& m, const std::string& path) {
  write_json_file(path, checkpoint_json(m));
}

inline TransferModel load_model(const std::string& path) {
  return model_from_checkpoint(read_json_file(path), path);
}

/// Rejects a model whose featurization does not fit `vocab`.
inline void check_compatible(const TransferModel& m, const Vocabulary& vocab) {
  if (m.vocab.id() != vocab.id()) {
    throw Error(ErrorCode::shape_mismatch, "model vocabulary " + m.vocab.id() +
                                               " does not match " + vocab.id());
  }
}

}  // namespace mtransfer
