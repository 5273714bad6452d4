// SPDX-License-Identifier: Apache-2.0
#include "lift/errors.hpp"

#include <array>
#include <utility>

namespace lift {
namespace {

constexpr std::array<std::pair<ErrorKind, std::string_view>, 20> kNames{{
    {ErrorKind::Validation, "ValidationError"},
    {ErrorKind::UnknownPromptKind, "UnknownPromptKind"},
    {ErrorKind::MalformedResponse, "MalformedResponse"},
    {ErrorKind::EmptyList, "EmptyList"},
    {ErrorKind::Transport, "TransportError"},
    {ErrorKind::TrainerUnavailable, "TrainerUnavailable"},
    {ErrorKind::UnknownModel, "UnknownModel"},
    {ErrorKind::UnknownJob, "UnknownJob"},
    {ErrorKind::UnknownRef, "UnknownRef"},
    {ErrorKind::DuplicateJobId, "DuplicateJobId"},
    {ErrorKind::JobFinalized, "JobFinalized"},
    {ErrorKind::NoBatchesTrained, "NoBatchesTrained"},
    {ErrorKind::EncodingError, "EncodingError"},
    {ErrorKind::ConcurrentTrainRejected, "ConcurrentTrainRejected"},
    {ErrorKind::NoTrainingData, "NoTrainingData"},
    {ErrorKind::CacheIncomplete, "CacheIncomplete"},
    {ErrorKind::CacheCorrupt, "CacheCorrupt"},
    {ErrorKind::FillerTooShort, "FillerTooShort"},
    {ErrorKind::JudgeUnparseable, "JudgeUnparseable"},
    {ErrorKind::MissingEvent, "MissingEvent"},
}};

}  // namespace

std::string_view to_string(ErrorKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "Unknown";
}

ErrorKind error_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw ValidationError("error.kind", "unknown error kind '" + std::string(name) + "'");
}

}  // namespace lift
