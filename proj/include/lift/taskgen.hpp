// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lift/chat_client.hpp"
#include "lift/types.hpp"

namespace lift {

struct SamplingParams {
  double temperature = 0.7;
  int max_output_tokens = 1024;

  bool operator==(const SamplingParams&) const = default;
};

struct GenerationConfig {
  int qas_per_sentence = 5;
  PromptKind prompt_kind = PromptKind::generic;
  std::string endpoint_url;
  std::string model_name;
  int max_retries = 3;
  int request_parallelism = 4;
  SamplingParams sampling;

  void validate() const;
  bool operator==(const GenerationConfig&) const = default;
};

inline constexpr std::string_view kPromptTemplateVersion = "v1";

struct RenderedPrompt {
  std::string system;
  std::string user;

  std::vector<ChatMessage> messages() const;
  // SHA-256 over the encoded message list.
  std::string digest() const;
};

RenderedPrompt render_prompt(const SentenceUnit& unit, const GenerationConfig& cfg);

// Raw template text for a prompt kind, as stored in the asset bundle.
std::string_view system_template(PromptKind kind);
std::string_view user_template();

// Single-pass placeholder substitution: "{name}" tokens with a binding are
// replaced, everything else (including JSON braces) is copied verbatim.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string_view, std::string>>& bindings);

using QAText = std::pair<std::string, std::string>;

// Throws Error{MalformedResponse} or Error{EmptyList}.
std::vector<QAText> parse_qa_response(std::string_view raw_text, int m);

enum class OutcomeStatus { ok, partial, skipped };
std::string_view to_string(OutcomeStatus status);
OutcomeStatus outcome_status_from_string(std::string_view s);

struct GenerationOutcome {
  SentenceUnit unit;
  std::vector<QAPair> pairs;
  OutcomeStatus status = OutcomeStatus::skipped;
  int attempts = 0;
  std::string prompt_hash;
  std::string last_error;
};

GenerationOutcome generate_for_sentence(const SentenceUnit& unit, const GenerationConfig& cfg,
                                        ChatClient& client);

// Attention-dominated training cost: m*l^2 for m short QAs, (m*l)^2 for one
// long QA of the same total length.
std::uint64_t estimate_training_cost(const CostModel& c, bool split);

}  // namespace lift
