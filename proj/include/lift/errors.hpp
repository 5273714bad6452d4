// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lift {

enum class ErrorKind {
  Validation,
  UnknownPromptKind,
  MalformedResponse,
  EmptyList,
  Transport,
  TrainerUnavailable,
  UnknownModel,
  UnknownJob,
  UnknownRef,
  DuplicateJobId,
  JobFinalized,
  NoBatchesTrained,
  EncodingError,
  ConcurrentTrainRejected,
  NoTrainingData,
  CacheIncomplete,
  CacheCorrupt,
  FillerTooShort,
  JudgeUnparseable,
  MissingEvent,
};

std::string_view to_string(ErrorKind kind);
ErrorKind error_kind_from_string(std::string_view name);

// Base of every error the engine raises; kind() is the machine-readable tag
// that crosses process boundaries (HTTP error bodies, CLI error records).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(ErrorKind::Validation, field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace lift
