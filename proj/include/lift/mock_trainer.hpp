// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lift/errors.hpp"
#include "lift/trainer.hpp"

namespace lift {

inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Order-free toy language model: one categorical distribution per output
// position over a fixed whitespace-token vocabulary, all uniform at start.
// The question never conditions the output, so the answer-only loss is
// computable in closed form. Distributions are kept as log-weights.
class MockModel {
 public:
  // The vocabulary must contain kEosToken; kUnkToken is optional and, when
  // present, absorbs out-of-vocabulary words.
  explicit MockModel(std::vector<std::string> vocabulary);

  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }

  // Whitespace tokens followed by EOS. Throws Error{EncodingError}.
  std::vector<int> encode(std::string_view text) const;
  std::string detokenize(const std::vector<int>& tokens) const;

  std::vector<double> distribution(std::size_t position) const;
  double log_prob(std::size_t position, int token) const;
  // Negative log-likelihood of `tokens` at positions 0..n-1.
  double sequence_nll(const std::vector<int>& tokens) const;

  // One step: every observed (position, token) occurrence multiplies that
  // token's probability by (1 + eta), then each position is renormalised.
  void update(const std::vector<std::vector<int>>& sequences, double eta);

  std::vector<int> decode_greedy(int max_tokens) const;
  std::vector<int> decode_sampled(int max_tokens, double temperature, std::uint64_t seed) const;

 private:
  const std::vector<double>* weights(std::size_t position) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  int eos_ = -1;
  int unk_ = -1;
  std::vector<std::vector<double>> log_weights_;  // empty row == uniform
};

struct MockTrainerOptions {
  // Artificial delay inside train_batch, for latency and concurrency tests.
  std::chrono::microseconds train_latency{0};
};

// In-process trainer worker backed by MockModel. Mock update rate is
// eta = 10 * learning_rate. Thread-safe; distinct jobs train concurrently.
class MockTrainer final : public Trainer {
 public:
  explicit MockTrainer(MockTrainerOptions options = {});
  ~MockTrainer() override;

  void register_model(const std::string& name, std::vector<std::string> vocabulary);
  bool has_model(const std::string& name) const;

  // EOS (+ UNK when requested) followed by the sorted distinct whitespace
  // tokens of `text`.
  static std::vector<std::string> vocabulary_from_text(std::string_view text, bool with_unk = true);

  std::string create_job(const TrainerJob& job) override;
  BatchLossReport train_batch(const std::string& handle, const TaskBatch& batch) override;
  std::string finalize(const std::string& handle) override;
  std::string generate(const std::string& handle_or_ref, const std::string& prompt,
                       int max_tokens, const Decoding& decoding) override;
  std::size_t tokenize(std::string_view text) override;

  // Copy of a job's current model (for tests and diagnostics).
  MockModel model_of(const std::string& handle_or_ref) const;

 private:
  struct Job;
  std::shared_ptr<Job> find_job(const std::string& handle, ErrorKind missing) const;

  MockTrainerOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> models_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::map<std::string, std::string> refs_;
};

}  // namespace lift
