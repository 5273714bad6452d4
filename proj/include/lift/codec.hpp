// SPDX-License-Identifier: Apache-2.0
#pragma once

// Interchange encoding (JSON) for the domain types. from_json validates, so a
// decoded value always satisfies its type's invariants.

#include <string>
#include <string_view>

#include <json.hpp>

#include "lift/errors.hpp"
#include "lift/types.hpp"

namespace lift {

using json = nlohmann::json;

std::string_view to_string(BenchmarkKind kind);
std::string_view to_string(TokenEstimatorKind kind);
std::string_view to_string(BatchSource source);
std::string_view to_string(InitScheme scheme);
std::string_view to_string(LossMasking masking);
std::string_view to_string(EventKind kind);

// Each parser throws ValidationError naming `field` on an unknown name.
BenchmarkKind benchmark_kind_from_string(std::string_view s, const std::string& field = "benchmark_kind");
TokenEstimatorKind token_estimator_from_string(std::string_view s, const std::string& field = "token_estimator");
BatchSource batch_source_from_string(std::string_view s, const std::string& field = "source");
EventKind event_kind_from_string(std::string_view s, const std::string& field = "event_kind");

void to_json(json& j, const Document& v);
void from_json(const json& j, Document& v);
void to_json(json& j, const SentenceUnit& v);
void from_json(const json& j, SentenceUnit& v);
void to_json(json& j, const QAPair& v);
void from_json(const json& j, QAPair& v);
void to_json(json& j, const RawSegment& v);
void from_json(const json& j, RawSegment& v);
void to_json(json& j, const TrainingItem& v);
void from_json(const json& j, TrainingItem& v);
void to_json(json& j, const TaskBatch& v);
void from_json(const json& j, TaskBatch& v);
void to_json(json& j, const AdapterConfig& v);
void from_json(const json& j, AdapterConfig& v);
void to_json(json& j, const TrainerJob& v);
void from_json(const json& j, TrainerJob& v);
void to_json(json& j, const BatchLossReport& v);
void from_json(const json& j, BatchLossReport& v);
void to_json(json& j, const NiahCase& v);
void from_json(const json& j, NiahCase& v);
void to_json(json& j, const MetricEvent& v);
void from_json(const json& j, MetricEvent& v);
void to_json(json& j, const PipelineMetrics& v);
void from_json(const json& j, PipelineMetrics& v);
void to_json(json& j, const CostModel& v);
void from_json(const json& j, CostModel& v);

// Typed field access that reports the field name on a missing key or a
// type mismatch.
template <typename T>
T required(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains(field)) {
    throw ValidationError(field, "missing");
  }
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(field, e.what());
  }
}

template <typename T>
T optional_or(const json& j, const std::string& field, T fallback) {
  if (!j.is_object() || !j.contains(field) || j.at(field).is_null()) {
    return fallback;
  }
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(field, e.what());
  }
}

// Single-line canonical encoding (sorted keys, no whitespace).
template <typename T>
std::string encode(const T& value) {
  return json(value).dump();
}

template <typename T>
T decode(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("json", e.what());
  }
  return j.get<T>();
}

}  // namespace lift
