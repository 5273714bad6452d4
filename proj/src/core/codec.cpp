// SPDX-License-Identifier: Apache-2.0
#include "lift/codec.hpp"

#include <array>
#include <utility>

namespace lift {
namespace {

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
E value_of(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s,
           const std::string& field) {
  for (const auto& [v, name] : table) {
    if (name == s) return v;
  }
  throw ValidationError(field, "unknown value '" + std::string(s) + "'");
}

constexpr std::array<std::pair<BenchmarkKind, std::string_view>, 3> kBenchmark{{
    {BenchmarkKind::squad, "squad"},
    {BenchmarkKind::niah, "niah"},
    {BenchmarkKind::generic, "generic"},
}};

constexpr std::array<std::pair<TokenEstimatorKind, std::string_view>, 3> kEstimator{{
    {TokenEstimatorKind::chars_div_4, "chars_div_4"},
    {TokenEstimatorKind::whitespace_words, "whitespace_words"},
    {TokenEstimatorKind::external, "external"},
}};

constexpr std::array<std::pair<BatchSource, std::string_view>, 3> kSource{{
    {BatchSource::qa, "qa"},
    {BatchSource::raw_segment, "raw_segment"},
    {BatchSource::mixed, "mixed"},
}};

constexpr std::array<std::pair<EventKind, std::string_view>, 8> kEvent{{
    {EventKind::input_submitted, "input_submitted"},
    {EventKind::sentence_dispatched, "sentence_dispatched"},
    {EventKind::qa_arrived, "qa_arrived"},
    {EventKind::batch_formed, "batch_formed"},
    {EventKind::batch_trained, "batch_trained"},
    {EventKind::training_done, "training_done"},
    {EventKind::first_answer_token, "first_answer_token"},
    {EventKind::answer_done, "answer_done"},
}};

}  // namespace

std::string_view to_string(BenchmarkKind kind) { return name_of(kBenchmark, kind); }
std::string_view to_string(TokenEstimatorKind kind) { return name_of(kEstimator, kind); }
std::string_view to_string(BatchSource source) { return name_of(kSource, source); }
std::string_view to_string(InitScheme) { return "b_zero"; }
std::string_view to_string(LossMasking) { return "answer_only"; }
std::string_view to_string(EventKind kind) { return name_of(kEvent, kind); }

BenchmarkKind benchmark_kind_from_string(std::string_view s, const std::string& field) {
  return value_of(kBenchmark, s, field);
}
TokenEstimatorKind token_estimator_from_string(std::string_view s, const std::string& field) {
  return value_of(kEstimator, s, field);
}
BatchSource batch_source_from_string(std::string_view s, const std::string& field) {
  return value_of(kSource, s, field);
}
EventKind event_kind_from_string(std::string_view s, const std::string& field) {
  return value_of(kEvent, s, field);
}

void to_json(json& j, const Document& v) {
  j = json{{"doc_id", v.doc_id},
           {"text", v.text},
           {"benchmark_kind", to_string(v.benchmark_kind)},
           {"approx_token_count", v.approx_token_count}};
}

void from_json(const json& j, Document& v) {
  v.doc_id = required<std::string>(j, "doc_id");
  v.text = required<std::string>(j, "text");
  v.benchmark_kind = benchmark_kind_from_string(required<std::string>(j, "benchmark_kind"));
  v.approx_token_count = required<std::size_t>(j, "approx_token_count");
  v.validate();
}

void to_json(json& j, const SentenceUnit& v) {
  j = json{{"doc_id", v.doc_id},
           {"sentence_index", v.sentence_index},
           {"sentence_text", v.sentence_text},
           {"preceding_context", v.preceding_context}};
}

void from_json(const json& j, SentenceUnit& v) {
  v.doc_id = required<std::string>(j, "doc_id");
  v.sentence_index = required<int>(j, "sentence_index");
  v.sentence_text = required<std::string>(j, "sentence_text");
  v.preceding_context = required<std::string>(j, "preceding_context");
  v.validate();
}

void to_json(json& j, const QAPair& v) {
  j = json{{"doc_id", v.doc_id},
           {"sentence_index", v.sentence_index},
           {"qa_index", v.qa_index},
           {"question", v.question},
           {"answer", v.answer},
           {"generator_model", v.generator_model},
           {"prompt_hash", v.prompt_hash}};
}

void from_json(const json& j, QAPair& v) {
  v.doc_id = required<std::string>(j, "doc_id");
  v.sentence_index = required<int>(j, "sentence_index");
  v.qa_index = required<int>(j, "qa_index");
  v.question = required<std::string>(j, "question");
  v.answer = required<std::string>(j, "answer");
  v.generator_model = required<std::string>(j, "generator_model");
  v.prompt_hash = required<std::string>(j, "prompt_hash");
  v.validate();
}

void to_json(json& j, const RawSegment& v) {
  j = json{{"doc_id", v.doc_id},
           {"segment_index", v.segment_index},
           {"text", v.text},
           {"target_token_len", v.target_token_len}};
}

void from_json(const json& j, RawSegment& v) {
  v.doc_id = required<std::string>(j, "doc_id");
  v.segment_index = required<int>(j, "segment_index");
  v.text = required<std::string>(j, "text");
  v.target_token_len = required<int>(j, "target_token_len");
  v.validate();
}

void to_json(json& j, const TrainingItem& v) {
  if (const auto* qa = std::get_if<QAPair>(&v)) {
    j = *qa;
    j["kind"] = "qa";
  } else {
    j = std::get<RawSegment>(v);
    j["kind"] = "raw_segment";
  }
}

void from_json(const json& j, TrainingItem& v) {
  const auto kind = required<std::string>(j, "kind");
  if (kind == "qa") {
    v = j.get<QAPair>();
  } else if (kind == "raw_segment") {
    v = j.get<RawSegment>();
  } else {
    throw ValidationError("kind", "unknown item kind '" + kind + "'");
  }
}

void to_json(json& j, const TaskBatch& v) {
  j = json{{"epoch", v.epoch},
           {"batch_index", v.batch_index},
           {"source", to_string(v.source)},
           {"items", v.items}};
}

void from_json(const json& j, TaskBatch& v) {
  v.epoch = required<int>(j, "epoch");
  v.batch_index = required<int>(j, "batch_index");
  v.source = batch_source_from_string(required<std::string>(j, "source"));
  if (!j.contains("items") || !j.at("items").is_array()) {
    throw ValidationError("items", "must be an array");
  }
  v.items = j.at("items").get<std::vector<TrainingItem>>();
  v.validate();
}

void to_json(json& j, const AdapterConfig& v) {
  j = json{{"rank", v.rank}, {"alpha", v.alpha}, {"init_scheme", to_string(v.init_scheme)}};
}

void from_json(const json& j, AdapterConfig& v) {
  v.rank = required<int>(j, "rank");
  v.alpha = required<double>(j, "alpha");
  const auto scheme = required<std::string>(j, "init_scheme");
  if (scheme != "b_zero") throw ValidationError("adapter.init_scheme", "unknown value '" + scheme + "'");
  v.init_scheme = InitScheme::b_zero;
  if (v.rank <= 0) throw ValidationError("adapter.rank", "must be > 0");
}

void to_json(json& j, const TrainerJob& v) {
  j = json{{"job_id", v.job_id},
           {"base_model", v.base_model},
           {"adapter", v.adapter},
           {"learning_rate", v.learning_rate},
           {"epochs", v.epochs},
           {"batch_size", v.batch_size},
           {"seed", v.seed},
           {"loss_masking", to_string(v.loss_masking)}};
}

void from_json(const json& j, TrainerJob& v) {
  v.job_id = required<std::string>(j, "job_id");
  v.base_model = required<std::string>(j, "base_model");
  v.adapter = required<AdapterConfig>(j, "adapter");
  v.learning_rate = required<double>(j, "learning_rate");
  v.epochs = required<int>(j, "epochs");
  v.batch_size = required<int>(j, "batch_size");
  v.seed = required<std::int64_t>(j, "seed");
  const auto masking = required<std::string>(j, "loss_masking");
  if (masking != "answer_only") throw ValidationError("loss_masking", "unknown value '" + masking + "'");
  v.loss_masking = LossMasking::answer_only;
  v.validate();
}

void to_json(json& j, const BatchLossReport& v) {
  j = json{{"epoch", v.epoch},
           {"batch_index", v.batch_index},
           {"mean_loss", v.mean_loss},
           {"item_count", v.item_count}};
}

void from_json(const json& j, BatchLossReport& v) {
  v.epoch = required<int>(j, "epoch");
  v.batch_index = required<int>(j, "batch_index");
  v.mean_loss = required<double>(j, "mean_loss");
  v.item_count = required<int>(j, "item_count");
  v.validate();
}

void to_json(json& j, const NiahCase& v) {
  j = json{{"length_l", v.length_l},
           {"depth_d", v.depth_d},
           {"needle", v.needle},
           {"question", v.question},
           {"instances", v.instances}};
}

void from_json(const json& j, NiahCase& v) {
  v.length_l = required<int>(j, "length_l");
  v.depth_d = required<double>(j, "depth_d");
  v.needle = required<std::string>(j, "needle");
  v.question = required<std::string>(j, "question");
  v.instances = required<std::vector<std::string>>(j, "instances");
  v.validate();
}

void to_json(json& j, const MetricEvent& v) {
  j = json{{"event", to_string(v.kind)}, {"t", v.time_s}};
}

void from_json(const json& j, MetricEvent& v) {
  v.kind = event_kind_from_string(required<std::string>(j, "event"), "event");
  v.time_s = required<double>(j, "t");
}

void to_json(json& j, const PipelineMetrics& v) {
  j = json{{"events", v.events}};
  if (auto t = v.ttft()) j["ttft"] = *t;
}

void from_json(const json& j, PipelineMetrics& v) {
  v.events = required<std::vector<MetricEvent>>(j, "events");
  v.validate();
}

void to_json(json& j, const CostModel& v) {
  j = json{{"m", v.qa_count}, {"l", v.qa_token_len}};
}

void from_json(const json& j, CostModel& v) {
  v.qa_count = required<std::int64_t>(j, "m");
  v.qa_token_len = required<std::int64_t>(j, "l");
  v.validate();
}

}  // namespace lift
