// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lift {

enum class BenchmarkKind { squad, niah, generic };
using PromptKind = BenchmarkKind;

enum class TokenEstimatorKind { chars_div_4, whitespace_words, external };

struct Document {
  std::string doc_id;
  std::string text;
  BenchmarkKind benchmark_kind = BenchmarkKind::generic;
  std::size_t approx_token_count = 0;

  void validate() const;
  bool operator==(const Document&) const = default;
};

struct SentenceUnit {
  std::string doc_id;
  int sentence_index = 0;
  std::string sentence_text;
  std::string preceding_context;

  void validate() const;
  bool operator==(const SentenceUnit&) const = default;
};

struct QAPair {
  std::string doc_id;
  int sentence_index = 0;
  int qa_index = 0;
  std::string question;
  std::string answer;
  std::string generator_model;
  std::string prompt_hash;

  void validate() const;
  // Also enforces qa_index < qas_per_sentence.
  void validate(int qas_per_sentence) const;
  bool operator==(const QAPair&) const = default;
};

struct RawSegment {
  std::string doc_id;
  int segment_index = 0;
  std::string text;
  int target_token_len = 0;

  void validate() const;
  bool operator==(const RawSegment&) const = default;
};

using TrainingItem = std::variant<QAPair, RawSegment>;

// Stable identity of a training item: "qa:<sentence>:<qa>" or "seg:<index>".
std::string item_key(const TrainingItem& item);

enum class BatchSource { qa, raw_segment, mixed };

BatchSource source_of(const std::vector<TrainingItem>& items);

struct TaskBatch {
  int epoch = 1;
  int batch_index = 0;
  std::vector<TrainingItem> items;
  BatchSource source = BatchSource::qa;

  void validate() const;
  void validate(int batch_size) const;
  bool operator==(const TaskBatch&) const = default;
};

enum class InitScheme { b_zero };
enum class LossMasking { answer_only };

struct AdapterConfig {
  int rank = 128;
  double alpha = 256.0;
  InitScheme init_scheme = InitScheme::b_zero;

  bool operator==(const AdapterConfig&) const = default;
};

struct TrainerJob {
  std::string job_id;
  std::string base_model;
  AdapterConfig adapter;
  double learning_rate = 1e-4;
  int epochs = 1;
  int batch_size = 16;
  std::int64_t seed = 0;
  LossMasking loss_masking = LossMasking::answer_only;

  void validate() const;
  bool operator==(const TrainerJob&) const = default;
};

struct BatchLossReport {
  int epoch = 1;
  int batch_index = 0;
  double mean_loss = 0.0;
  int item_count = 0;

  void validate() const;
  bool operator==(const BatchLossReport&) const = default;
};

inline constexpr int kNiahInstances = 5;

struct NiahCase {
  int length_l = 0;
  double depth_d = 0.0;
  std::string needle;
  std::string question;
  std::vector<std::string> instances;

  void validate() const;
  bool operator==(const NiahCase&) const = default;
};

enum class EventKind {
  input_submitted,
  sentence_dispatched,
  qa_arrived,
  batch_formed,
  batch_trained,
  training_done,
  first_answer_token,
  answer_done,
};

struct MetricEvent {
  EventKind kind = EventKind::input_submitted;
  double time_s = 0.0;

  bool operator==(const MetricEvent&) const = default;
};

// Snapshot of a run's event log. Times are seconds on the run's clock.
struct PipelineMetrics {
  std::vector<MetricEvent> events;

  void validate() const;
  std::optional<double> first(EventKind kind) const;
  std::optional<double> ttft() const;
  bool operator==(const PipelineMetrics&) const = default;
};

struct CostModel {
  std::int64_t qa_count = 1;
  std::int64_t qa_token_len = 1;

  void validate() const;
  bool operator==(const CostModel&) const = default;
};

}  // namespace lift
