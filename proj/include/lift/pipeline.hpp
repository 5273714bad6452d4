// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lift/chat_client.hpp"
#include "lift/metrics_log.hpp"
#include "lift/segmenter.hpp"
#include "lift/task_cache.hpp"
#include "lift/taskgen.hpp"
#include "lift/trainer.hpp"
#include "lift/types.hpp"

namespace lift {

enum class BatchOrder { arrival_then_canonical, always_canonical };
enum class TrainingMode { lift_qa, finetune_raw, lift_plus_segments };

std::string_view to_string(BatchOrder order);
std::string_view to_string(TrainingMode mode);
BatchOrder batch_order_from_string(std::string_view s);
TrainingMode training_mode_from_string(std::string_view s);

struct PipelineConfig {
  int batch_size = 16;
  int epochs = 1;
  int queue_capacity = 64;
  BatchOrder batch_order = BatchOrder::arrival_then_canonical;
  TrainingMode mode = TrainingMode::lift_qa;
  std::string cache_dir;  // empty: memory-only cache
  // Fraction of training items that are raw segments in lift_plus_segments.
  double segment_ratio = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

// Splits an ordered item stream into batches of `batch_size`; only the last
// may be short.
std::vector<TaskBatch> assemble_batches(const std::vector<TrainingItem>& items, int batch_size,
                                        int epoch);

// Decides, slot by slot, whether the next training item is a raw segment.
// Error-diffusion over `ratio` with a seed-derived phase, so any window of
// 1/ratio slots holds one segment give or take one.
class SegmentMixer {
 public:
  SegmentMixer(double ratio, std::uint64_t seed);
  bool next_is_segment();

 private:
  double ratio_;
  double acc_;
};

// Interleaves `segments` into `qa` per SegmentMixer. Once one side runs out
// the other follows in order. A ratio of 0 returns `qa` unchanged.
std::vector<TrainingItem> mix_segments(const std::vector<QAPair>& qa,
                                       const std::vector<RawSegment>& segments, double ratio,
                                       std::uint64_t seed);

// Canonical-order batches from a completed cache; no generator traffic.
// Throws Error{CacheIncomplete}.
std::vector<TaskBatch> replay_from_cache(const CacheKey& key, const PipelineConfig& cfg,
                                         int epoch = 2);

struct SkippedSentence {
  int sentence_index = 0;
  int attempts = 0;
  std::string error;
  bool operator==(const SkippedSentence&) const = default;
};

struct RunReport {
  std::string doc_id;
  std::string job_id;
  std::string adapter_ref;
  std::string decoding = "greedy";
  GenerationConfig generation;
  SegmenterConfig segmenter;
  PipelineConfig pipeline;
  TrainerJob job;

  int n_sentences = 0;
  int resumed_sentences = 0;  // served from an existing cache
  std::int64_t generator_calls = 0;
  std::int64_t generator_calls_after_epoch1 = 0;
  std::size_t queue_high_water = 0;
  std::vector<SkippedSentence> skipped;

  std::vector<BatchLossReport> losses;
  std::vector<std::vector<std::string>> batch_items;  // item_key()s, parallel to losses
  PipelineMetrics metrics;

  std::vector<double> epoch_mean_loss() const;
  // Item keys of one epoch in training order.
  std::vector<std::string> epoch_items(int epoch) const;
};

void to_json(nlohmann::json& j, const SkippedSentence& v);
void to_json(nlohmann::json& j, const RunReport& v);

struct LiftRequest {
  Document doc;
  GenerationConfig generation;
  SegmenterConfig segmenter;
  PipelineConfig pipeline;
  TrainerJob job;

  void validate() const;
};

// Full LIFT run: producers synthesize QA pairs while the consumer trains
// batches as they fill; later epochs replay the cache. `generator` may be
// null in finetune_raw mode. Throws Error{NoTrainingData} when no sentence
// yields a pair, and lets trainer errors (TrainerUnavailable, ...) abort.
// `metrics`, when given, is the clock and log the run records into.
RunReport run_lift(const LiftRequest& request, Trainer& trainer, ChatClient* generator,
                   MetricsLog* metrics = nullptr);

// Convenience form resolving the generator from generation.endpoint_url and
// the trainer from the endpoint; an in_process endpoint gets a MockTrainer
// whose vocabulary is the document's words.
RunReport run_lift(const Document& doc, const GenerationConfig& gen, const SegmenterConfig& seg,
                   const PipelineConfig& pipe, const TrainerJob& job,
                   const TrainerEndpoint& endpoint);

struct GenerationReport {
  std::string doc_id;
  int n_sentences = 0;
  int resumed_sentences = 0;
  std::int64_t generator_calls = 0;
  std::size_t qa_pairs = 0;
  bool complete = false;
  std::string cache_digest;
  std::string cache_file;
  std::vector<SkippedSentence> skipped;
};

void to_json(nlohmann::json& j, const GenerationReport& v);

// Producer side only: fills the cache and writes the completeness marker.
GenerationReport generate_tasks(const Document& doc, const GenerationConfig& gen,
                                const SegmenterConfig& seg, const PipelineConfig& pipe,
                                ChatClient& generator);

}  // namespace lift
