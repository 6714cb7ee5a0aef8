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

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtransfer {

enum class ErrorCode {
  invalid_argument,
  invalid_quaternion,
  too_short,
  cannot_preserve_gripper_sequence,
  empty_pool,
  empty_vocabulary,
  invalid_thresholds,
  shape_mismatch,
  divergence,
  too_few_manuals,
  empty_dataset,
  schema,
  referential_integrity,
  io,
  not_found,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_quaternion: return "invalid-quaternion";
    case ErrorCode::too_short: return "too-short";
    case ErrorCode::cannot_preserve_gripper_sequence:
      return "cannot-preserve-gripper-sequence";
    case ErrorCode::empty_pool: return "empty-pool";
    case ErrorCode::empty_vocabulary: return "empty-vocabulary";
    case ErrorCode::invalid_thresholds: return "invalid-thresholds";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::too_few_manuals: return "too-few-manuals";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::schema: return "schema";
    case ErrorCode::referential_integrity: return "referential-integrity";
    case ErrorCode::io: return "io";
    case ErrorCode::not_found: return "not-found";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI, HTTP service) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Schema violation pinned to a location: a file and/or a JSON field path
/// such as "waypoints[2].r".
class SchemaError : public Error {
 public:
  SchemaError(std::string file, std::string field, const std::string& message)
      : Error(ErrorCode::schema, compose(file, field, message)),
        file_(std::move(file)),
        field_(std::move(field)) {}

  const std::string& file() const noexcept { return file_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string compose(const std::string& file, const std::string& field,
                             const std::string& message) {
    std::string out;
    if (!file.empty()) out += file + ": ";
    if (!field.empty()) out += field + ": ";
    return out + message;
  }

  std::string file_;
  std::string field_;
};

}  // namespace mtransfer
