// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lift/types.hpp"

namespace lift {

enum class DecodingMode { greedy, sampled };

struct Decoding {
  DecodingMode mode = DecodingMode::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static Decoding greedy() { return {}; }
  static Decoding sampled(double temperature, std::uint64_t seed) {
    return {DecodingMode::sampled, temperature, seed};
  }
};

void to_json(nlohmann::json& j, const Decoding& d);
void from_json(const nlohmann::json& j, Decoding& d);

// Prefix addressing the untouched base model through generate():
// "base:<model name>".
inline constexpr std::string_view kBaseRefPrefix = "base:";

// The fine-tuning worker contract. Errors are lift::Error with kinds
// UnknownModel, UnknownJob, UnknownRef, DuplicateJobId, JobFinalized,
// NoBatchesTrained, EncodingError, ConcurrentTrainRejected, Validation and,
// for remote workers, TrainerUnavailable.
class Trainer {
 public:
  virtual ~Trainer() = default;

  // Returns the job handle (the job id).
  virtual std::string create_job(const TrainerJob& job) = 0;
  virtual BatchLossReport train_batch(const std::string& handle, const TaskBatch& batch) = 0;
  virtual std::string finalize(const std::string& handle) = 0;
  virtual std::string generate(const std::string& handle_or_ref, const std::string& prompt,
                               int max_tokens, const Decoding& decoding) = 0;
  virtual std::size_t tokenize(std::string_view text) = 0;
};

// The context-free query wrapper used when asking a LIFTed model.
std::string question_prompt(std::string_view question);

struct TrainerEndpoint {
  std::string base_url;
  bool in_process = false;
  std::chrono::milliseconds timeout{30000};
  std::string auth_env = "LIFT_TRAINER_API_KEY";

  void validate() const;
  static TrainerEndpoint local() { return TrainerEndpoint{{}, true}; }
  static TrainerEndpoint remote(std::string url) { return TrainerEndpoint{std::move(url), false}; }
};

}  // namespace lift
