// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lift/chat_client.hpp"
#include "lift/pipeline.hpp"
#include "lift/segmenter.hpp"
#include "lift/trainer.hpp"
#include "lift/types.hpp"

namespace lift {

inline constexpr std::string_view kNeedle =
    "The best thing to do in San Francisco is eat a sandwich and sit in Dolores Park on a sunny day.";
inline constexpr std::string_view kNiahQuestion = "What is the best thing to do in San Francisco?";

// Instances use disjoint corpus slices when the corpus holds this many times
// the target length, else seeded shuffles of its paragraphs.
inline constexpr int kDisjointSliceFactor = kNiahInstances;
inline constexpr double kNiahLengthTolerance = 0.02;

// Token estimate of the text before the needle (its first token index).
std::size_t needle_token_index(std::string_view instance, TokenEstimatorKind estimator);

// Throws Error{FillerTooShort} and ValidationError for depth outside
// [0, 100] or an external estimator.
NiahCase build_niah_case(int length_l, double depth_d, std::string_view filler_corpus,
                         std::uint64_t seed,
                         TokenEstimatorKind estimator = TokenEstimatorKind::chars_div_4);

// All of "sandwich", "dolores park" and "sunny", case-insensitively.
bool score_niah_response(std::string_view response);

struct JudgeConfig {
  std::string endpoint_url;
  std::string model_name;
  int retries = 2;

  void validate() const;
  bool operator==(const JudgeConfig&) const = default;
};

void to_json(nlohmann::json& j, const JudgeConfig& v);
void from_json(const nlohmann::json& j, JudgeConfig& v);

std::string render_judge_prompt(std::string_view question, std::string_view ground_truth,
                                std::string_view response);
// Exactly "True" or "False" after trimming; anything else is nullopt.
std::optional<bool> parse_judge_verdict(std::string_view reply);

// Throws Error{JudgeUnparseable} after cfg.retries + 1 unusable replies;
// transport errors surface once retries run out.
bool judge_answer(std::string_view question, std::string_view ground_truth,
                  std::string_view response, const JudgeConfig& cfg, ChatClient& client);

struct NiahInstanceResult {
  int instance = 0;
  bool correct = false;
  std::string response;
};

struct NiahCell {
  int length_l = 0;
  double depth_d = 0.0;
  bool failed = false;
  std::string error;
  int correct_count = 0;
  double accuracy = 0.0;  // correct_count / 5
  std::vector<NiahInstanceResult> instances;
};

struct NiahReport {
  std::vector<int> lengths;
  std::vector<double> depths;
  std::vector<NiahCell> cells;  // lengths-major: cells[i * depths.size() + j]

  const NiahCell& cell(std::size_t length_i, std::size_t depth_j) const;
  // Rows are depths, columns lengths.
  std::string heatmap() const;
  // length,depth,accuracy; failed cells have an empty accuracy.
  std::string csv() const;
};

void to_json(nlohmann::json& j, const NiahReport& v);

// Runs one instance end to end and returns the model's answer.
using EngineRunFn =
    std::function<std::string(const NiahCase& c, int instance, std::uint64_t seed)>;

// Cells run concurrently up to max_concurrent_cells; a cell whose build or
// run throws is marked failed and the matrix carries on.
NiahReport run_niah_matrix(const std::vector<int>& lengths, const std::vector<double>& depths,
                           std::string_view filler_corpus, const EngineRunFn& engine,
                           std::uint64_t seed, int max_concurrent_cells = 2,
                           TokenEstimatorKind estimator = TokenEstimatorKind::chars_div_4);

struct LiftEngineOptions {
  GenerationConfig generation;
  SegmenterConfig segmenter;
  PipelineConfig pipeline;
  TrainerJob job;  // job_id is used as a prefix
  TrainerEndpoint trainer = TrainerEndpoint::local();
  // Query the untouched base model instead of training.
  bool skip_training = false;
  int max_answer_tokens = 64;
  Decoding decoding;
};

// One independent LIFT job per instance, then the question alone (wrapped
// by question_prompt) is put to the trained adapter.
EngineRunFn make_lift_engine(LiftEngineOptions options);

}  // namespace lift
