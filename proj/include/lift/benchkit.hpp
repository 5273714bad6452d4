// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lift/types.hpp"

namespace lift {

using Micros = std::int64_t;

Micros to_micros(double seconds);

// c0 + c1*x + c2*x^2 + ...
struct Polynomial {
  std::vector<double> coeffs;
  double operator()(double x) const;
  bool operator==(const Polynomial&) const = default;
};

struct CostParams {
  double gen_latency_per_sentence = 0.1;  // g, seconds
  int producer_parallelism = 4;           // p
  double train_time_per_batch = 0.05;     // t, seconds
  Polynomial icl_prefill_cost;            // seconds as a function of context length
  Polynomial icl_per_token_decode_cost;   // seconds per output token, by context length
  double lift_per_token_decode_cost = 0.0;

  void validate() const;
  bool operator==(const CostParams&) const = default;
};

void to_json(nlohmann::json& j, const CostParams& v);
void from_json(const nlohmann::json& j, CostParams& v);

struct SimEvent {
  EventKind kind = EventKind::input_submitted;
  Micros t = 0;
  int index = 0;  // sentence, item or batch number; 0 otherwise
  bool operator==(const SimEvent&) const = default;
};

struct Timeline {
  bool pipelined = false;
  int n_sentences = 0;
  int batches_per_epoch = 0;
  Micros generation_span = 0;  // last QA arrival
  Micros epoch1_done = 0;
  Micros training_done = 0;
  Micros first_answer_token = 0;
  std::vector<SimEvent> events;

  PipelineMetrics metrics() const;
  bool operator==(const Timeline&) const = default;
};

// Discrete-event model of the producer pool and the sequential trainer.
// Sentence i is dispatched at floor(i/p)*g and yields m items at +g. A batch
// starts when it is full (the last one when generation ends) and the trainer
// is free. Serial mode holds all training until generation completes.
// Buffering is unbounded. The first answer token follows training by one
// LIFT decode step.
Timeline simulate_schedule(int n_sentences, const CostParams& params, bool pipelined, int epochs,
                           int batch_size, int m);

// first_answer_token - input_submitted of the run's log. Throws
// Error{MissingEvent}.
double measure_ttft(const std::function<PipelineMetrics()>& run_fn);

struct CrossoverRow {
  std::int64_t output_len = 0;
  double lift_total = 0.0;
  double icl_total = 0.0;
  bool operator==(const CrossoverRow&) const = default;
};

struct CrossoverTable {
  double context_len = 0.0;
  double ttft_lift = 0.0;
  std::vector<CrossoverRow> rows;  // requested lengths plus the analytic point, ascending
  // Smallest output length where LIFT is strictly faster; none if never.
  std::optional<std::int64_t> crossover;

  std::string csv() const;
  std::string summary() const;
};

void to_json(nlohmann::json& j, const CrossoverTable& v);

CrossoverTable crossover_analysis(const CostParams& params, double context_len, double ttft_lift,
                                  const std::vector<std::int64_t>& output_lengths);

}  // namespace lift
