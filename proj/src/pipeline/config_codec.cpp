// SPDX-License-Identifier: Apache-2.0
#include "lift/config.hpp"

#include <algorithm>

#include "lift/codec.hpp"
#include "lift/errors.hpp"

namespace lift {

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known,
                         const std::string& section) {
  if (!j.is_object()) throw ValidationError(section, "must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(section.empty() ? key : section + "." + key, "unknown key");
    }
  }
}

void to_json(json& j, const SamplingParams& v) {
  j = json{{"temperature", v.temperature}, {"max_output_tokens", v.max_output_tokens}};
}

void from_json(const json& j, SamplingParams& v) {
  reject_unknown_keys(j, {"temperature", "max_output_tokens"}, "sampling");
  const SamplingParams d;
  v.temperature = optional_or(j, "temperature", d.temperature);
  v.max_output_tokens = optional_or(j, "max_output_tokens", d.max_output_tokens);
}

void to_json(json& j, const GenerationConfig& v) {
  j = json{{"qas_per_sentence", v.qas_per_sentence},
           {"prompt_kind", to_string(v.prompt_kind)},
           {"endpoint_url", v.endpoint_url},
           {"model_name", v.model_name},
           {"max_retries", v.max_retries},
           {"request_parallelism", v.request_parallelism},
           {"sampling", v.sampling}};
}

void from_json(const json& j, GenerationConfig& v) {
  reject_unknown_keys(j,
                      {"qas_per_sentence", "prompt_kind", "endpoint_url", "model_name",
                       "max_retries", "request_parallelism", "sampling"},
                      "generator");
  const GenerationConfig d;
  v.qas_per_sentence = optional_or(j, "qas_per_sentence", d.qas_per_sentence);
  v.prompt_kind = benchmark_kind_from_string(
      optional_or<std::string>(j, "prompt_kind", std::string(to_string(d.prompt_kind))),
      "generator.prompt_kind");
  v.endpoint_url = optional_or(j, "endpoint_url", d.endpoint_url);
  v.model_name = optional_or(j, "model_name", d.model_name);
  v.max_retries = optional_or(j, "max_retries", d.max_retries);
  v.request_parallelism = optional_or(j, "request_parallelism", d.request_parallelism);
  v.sampling = optional_or(j, "sampling", d.sampling);
  v.validate();
}

void to_json(json& j, const SegmenterConfig& v) {
  j = json{{"context_window_sentences", v.context_window_sentences},
           {"context_window_char_cap", v.context_window_char_cap},
           {"raw_segment_token_len", v.raw_segment_token_len},
           {"token_estimator", to_string(v.token_estimator)}};
}

void from_json(const json& j, SegmenterConfig& v) {
  reject_unknown_keys(j,
                      {"context_window_sentences", "context_window_char_cap",
                       "raw_segment_token_len", "token_estimator"},
                      "segmenter");
  const SegmenterConfig d;
  v.context_window_sentences = optional_or(j, "context_window_sentences", d.context_window_sentences);
  v.context_window_char_cap = optional_or(j, "context_window_char_cap", d.context_window_char_cap);
  v.raw_segment_token_len = optional_or(j, "raw_segment_token_len", d.raw_segment_token_len);
  v.token_estimator = token_estimator_from_string(
      optional_or<std::string>(j, "token_estimator", std::string(to_string(d.token_estimator))),
      "segmenter.token_estimator");
  v.validate();
}

void to_json(json& j, const PipelineConfig& v) {
  j = json{{"batch_size", v.batch_size},
           {"epochs", v.epochs},
           {"queue_capacity", v.queue_capacity},
           {"batch_order", to_string(v.batch_order)},
           {"mode", to_string(v.mode)},
           {"cache_dir", v.cache_dir},
           {"segment_ratio", v.segment_ratio},
           {"seed", v.seed}};
}

void from_json(const json& j, PipelineConfig& v) {
  reject_unknown_keys(j,
                      {"batch_size", "epochs", "queue_capacity", "batch_order", "mode",
                       "cache_dir", "segment_ratio", "seed"},
                      "pipeline");
  const PipelineConfig d;
  v.batch_size = optional_or(j, "batch_size", d.batch_size);
  v.epochs = optional_or(j, "epochs", d.epochs);
  v.queue_capacity = optional_or(j, "queue_capacity", std::max(d.queue_capacity, v.batch_size));
  v.batch_order = batch_order_from_string(
      optional_or<std::string>(j, "batch_order", std::string(to_string(d.batch_order))));
  v.mode = training_mode_from_string(
      optional_or<std::string>(j, "mode", std::string(to_string(d.mode))));
  v.cache_dir = optional_or(j, "cache_dir", d.cache_dir);
  v.segment_ratio = optional_or(j, "segment_ratio", d.segment_ratio);
  v.seed = optional_or(j, "seed", d.seed);
  v.validate();
}

}  // namespace lift
