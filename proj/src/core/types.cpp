// SPDX-License-Identifier: Apache-2.0
#include "lift/types.hpp"

#include <cmath>

#include "lift/errors.hpp"

namespace lift {

void Document::validate() const {
  if (text.empty()) throw ValidationError("text", "must be non-empty");
}

void SentenceUnit::validate() const {
  if (sentence_index < 0) throw ValidationError("sentence_index", "must be >= 0");
  if (sentence_text.empty()) throw ValidationError("sentence_text", "must be non-empty");
}

void QAPair::validate() const {
  if (sentence_index < 0) throw ValidationError("sentence_index", "must be >= 0");
  if (qa_index < 0) throw ValidationError("qa_index", "must be >= 0");
  if (question.empty()) throw ValidationError("question", "must be non-empty");
  if (answer.empty()) throw ValidationError("answer", "must be non-empty");
}

void QAPair::validate(int qas_per_sentence) const {
  validate();
  if (qa_index >= qas_per_sentence) {
    throw ValidationError("qa_index", "must be < qas_per_sentence (" +
                                          std::to_string(qas_per_sentence) + ")");
  }
}

void RawSegment::validate() const {
  if (segment_index < 0) throw ValidationError("segment_index", "must be >= 0");
  if (text.empty()) throw ValidationError("text", "must be non-empty");
  if (target_token_len < 1) throw ValidationError("target_token_len", "must be >= 1");
}

std::string item_key(const TrainingItem& item) {
  if (const auto* qa = std::get_if<QAPair>(&item)) {
    return "qa:" + std::to_string(qa->sentence_index) + ":" + std::to_string(qa->qa_index);
  }
  return "seg:" + std::to_string(std::get<RawSegment>(item).segment_index);
}

BatchSource source_of(const std::vector<TrainingItem>& items) {
  bool any_qa = false;
  bool any_seg = false;
  for (const auto& item : items) {
    (std::holds_alternative<QAPair>(item) ? any_qa : any_seg) = true;
  }
  if (any_qa && any_seg) return BatchSource::mixed;
  return any_seg ? BatchSource::raw_segment : BatchSource::qa;
}

void TaskBatch::validate() const {
  if (epoch < 1) throw ValidationError("epoch", "must be >= 1");
  if (batch_index < 0) throw ValidationError("batch_index", "must be >= 0");
  if (items.empty()) throw ValidationError("items", "must be non-empty");
  if (source != source_of(items)) throw ValidationError("source", "does not match items");
  for (const auto& item : items) {
    std::visit([](const auto& v) { v.validate(); }, item);
  }
}

void TaskBatch::validate(int batch_size) const {
  validate();
  if (static_cast<int>(items.size()) > batch_size) {
    throw ValidationError("items", "length exceeds batch_size " + std::to_string(batch_size));
  }
}

void TrainerJob::validate() const {
  if (job_id.empty()) throw ValidationError("job_id", "must be non-empty");
  if (base_model.empty()) throw ValidationError("base_model", "must be non-empty");
  if (adapter.rank <= 0) throw ValidationError("adapter.rank", "must be > 0");
  if (!(adapter.alpha > 0.0)) throw ValidationError("adapter.alpha", "must be > 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate", "must be a positive number");
  }
  if (epochs < 1) throw ValidationError("epochs", "must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
}

void BatchLossReport::validate() const {
  if (epoch < 1) throw ValidationError("epoch", "must be >= 1");
  if (batch_index < 0) throw ValidationError("batch_index", "must be >= 0");
  if (!std::isfinite(mean_loss) || mean_loss < 0.0) {
    throw ValidationError("mean_loss", "must be finite and >= 0");
  }
  if (item_count < 1) throw ValidationError("item_count", "must be >= 1");
}

void NiahCase::validate() const {
  if (length_l < 1) throw ValidationError("length_l", "must be >= 1");
  if (!(depth_d >= 0.0 && depth_d <= 100.0)) throw ValidationError("depth_d", "must be in [0, 100]");
  if (needle.empty()) throw ValidationError("needle", "must be non-empty");
  if (question.empty()) throw ValidationError("question", "must be non-empty");
  if (instances.size() != kNiahInstances) {
    throw ValidationError("instances", "must hold exactly " + std::to_string(kNiahInstances));
  }
  for (const auto& text : instances) {
    std::size_t count = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
      ++count;
    }
    if (count != 1) throw ValidationError("instances", "needle must appear exactly once");
  }
}

void PipelineMetrics::validate() const {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].time_s < events[i - 1].time_s) {
      throw ValidationError("events", "times must be nondecreasing");
    }
  }
}

std::optional<double> PipelineMetrics::first(EventKind kind) const {
  for (const auto& e : events) {
    if (e.kind == kind) return e.time_s;
  }
  return std::nullopt;
}

std::optional<double> PipelineMetrics::ttft() const {
  auto start = first(EventKind::input_submitted);
  auto token = first(EventKind::first_answer_token);
  if (!start || !token) return std::nullopt;
  return *token - *start;
}

void CostModel::validate() const {
  if (qa_count < 1) throw ValidationError("qa_count", "must be >= 1");
  if (qa_token_len < 1) throw ValidationError("qa_token_len", "must be >= 1");
}

}  // namespace lift
