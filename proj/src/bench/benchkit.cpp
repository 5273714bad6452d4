// SPDX-License-Identifier: Apache-2.0
#include "lift/benchkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lift/codec.hpp"
#include "lift/config.hpp"
#include "lift/errors.hpp"

namespace lift {

Micros to_micros(double seconds) { return std::llround(seconds * 1e6); }

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

void CostParams::validate() const {
  if (!(gen_latency_per_sentence >= 0.0)) throw ValidationError("gen_latency_per_sentence", "must be >= 0");
  if (producer_parallelism < 1) throw ValidationError("producer_parallelism", "must be >= 1");
  if (!(train_time_per_batch >= 0.0)) throw ValidationError("train_time_per_batch", "must be >= 0");
  if (!(lift_per_token_decode_cost >= 0.0)) {
    throw ValidationError("lift_per_token_decode_cost", "must be >= 0");
  }
  for (double c : icl_prefill_cost.coeffs) {
    if (!(c >= 0.0)) throw ValidationError("icl_prefill_cost", "coefficients must be >= 0");
  }
  for (double c : icl_per_token_decode_cost.coeffs) {
    if (!(c >= 0.0)) throw ValidationError("icl_per_token_decode_cost", "coefficients must be >= 0");
  }
}

void to_json(json& j, const CostParams& v) {
  j = json{{"gen_latency_per_sentence", v.gen_latency_per_sentence},
           {"producer_parallelism", v.producer_parallelism},
           {"train_time_per_batch", v.train_time_per_batch},
           {"icl_prefill_cost", v.icl_prefill_cost.coeffs},
           {"icl_per_token_decode_cost", v.icl_per_token_decode_cost.coeffs},
           {"lift_per_token_decode_cost", v.lift_per_token_decode_cost}};
}

void from_json(const json& j, CostParams& v) {
  reject_unknown_keys(j,
                      {"gen_latency_per_sentence", "producer_parallelism", "train_time_per_batch",
                       "icl_prefill_cost", "icl_per_token_decode_cost",
                       "lift_per_token_decode_cost"},
                      "bench.cost");
  const CostParams d;
  v.gen_latency_per_sentence = optional_or(j, "gen_latency_per_sentence", d.gen_latency_per_sentence);
  v.producer_parallelism = optional_or(j, "producer_parallelism", d.producer_parallelism);
  v.train_time_per_batch = optional_or(j, "train_time_per_batch", d.train_time_per_batch);
  v.icl_prefill_cost.coeffs = optional_or(j, "icl_prefill_cost", d.icl_prefill_cost.coeffs);
  v.icl_per_token_decode_cost.coeffs =
      optional_or(j, "icl_per_token_decode_cost", d.icl_per_token_decode_cost.coeffs);
  v.lift_per_token_decode_cost = optional_or(j, "lift_per_token_decode_cost", d.lift_per_token_decode_cost);
  v.validate();
}

PipelineMetrics Timeline::metrics() const {
  PipelineMetrics out;
  out.events.reserve(events.size());
  for (const auto& e : events) out.events.push_back({e.kind, static_cast<double>(e.t) / 1e6});
  return out;
}

Timeline simulate_schedule(int n_sentences, const CostParams& params, bool pipelined, int epochs,
                           int batch_size, int m) {
  if (n_sentences < 1) throw ValidationError("n_sentences", "must be >= 1");
  if (epochs < 1) throw ValidationError("epochs", "must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
  if (m < 1) throw ValidationError("m", "must be >= 1");
  params.validate();

  const Micros g = to_micros(params.gen_latency_per_sentence);
  const Micros t = to_micros(params.train_time_per_batch);
  const int p = params.producer_parallelism;

  Timeline tl;
  tl.pipelined = pipelined;
  tl.n_sentences = n_sentences;
  auto emit = [&](EventKind kind, Micros at, int index) { tl.events.push_back({kind, at, index}); };
  emit(EventKind::input_submitted, 0, 0);

  // Item k (0-based, sentence order) arrives with its sentence.
  const std::int64_t n_items = static_cast<std::int64_t>(n_sentences) * m;
  auto arrival = [&](std::int64_t item) {
    const auto sentence = item / m;
    return (sentence / p + 1) * g;
  };
  for (int s = 0; s < n_sentences; ++s) {
    emit(EventKind::sentence_dispatched, (s / p) * g, s);
    for (int q = 0; q < m; ++q) emit(EventKind::qa_arrived, (s / p + 1) * g, s * m + q);
  }
  tl.generation_span = arrival(n_items - 1);

  const auto n_batches = static_cast<int>((n_items + batch_size - 1) / batch_size);
  tl.batches_per_epoch = n_batches;
  Micros trainer_free = 0;
  for (int b = 0; b < n_batches; ++b) {
    const auto last_item = std::min<std::int64_t>(static_cast<std::int64_t>(b + 1) * batch_size, n_items) - 1;
    const Micros ready = pipelined ? arrival(last_item) : tl.generation_span;
    const Micros start = std::max(ready, trainer_free);
    emit(EventKind::batch_formed, start, b);
    trainer_free = start + t;
    emit(EventKind::batch_trained, trainer_free, b);
  }
  tl.epoch1_done = trainer_free;
  for (int e = 2; e <= epochs; ++e) {
    for (int b = 0; b < n_batches; ++b) {
      const int index = (e - 1) * n_batches + b;
      emit(EventKind::batch_formed, trainer_free, index);
      trainer_free += t;
      emit(EventKind::batch_trained, trainer_free, index);
    }
  }
  tl.training_done = trainer_free;
  emit(EventKind::training_done, trainer_free, 0);
  tl.first_answer_token = trainer_free + to_micros(params.lift_per_token_decode_cost);
  emit(EventKind::first_answer_token, tl.first_answer_token, 0);

  std::stable_sort(tl.events.begin(), tl.events.end(), [](const SimEvent& a, const SimEvent& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.index < b.index;
  });
  return tl;
}

double measure_ttft(const std::function<PipelineMetrics()>& run_fn) {
  const auto metrics = run_fn();
  if (!metrics.first(EventKind::input_submitted)) {
    throw Error(ErrorKind::MissingEvent, "no input_submitted event");
  }
  if (!metrics.first(EventKind::first_answer_token)) {
    throw Error(ErrorKind::MissingEvent, "no first_answer_token event");
  }
  return *metrics.ttft();
}

CrossoverTable crossover_analysis(const CostParams& params, double context_len, double ttft_lift,
                                  const std::vector<std::int64_t>& output_lengths) {
  params.validate();
  if (!(ttft_lift >= 0.0)) throw ValidationError("ttft_lift", "must be >= 0");
  const double prefill = params.icl_prefill_cost(context_len);
  const double icl_tok = params.icl_per_token_decode_cost(context_len);
  const double lift_tok = params.lift_per_token_decode_cost;
  auto lift_total = [&](std::int64_t k) { return ttft_lift + static_cast<double>(k) * lift_tok; };
  auto icl_total = [&](std::int64_t k) { return prefill + static_cast<double>(k) * icl_tok; };
  auto lift_wins = [&](std::int64_t k) { return lift_total(k) < icl_total(k); };

  CrossoverTable table;
  table.context_len = context_len;
  table.ttft_lift = ttft_lift;

  const double gap = ttft_lift - prefill;
  const double slope = icl_tok - lift_tok;
  if (lift_wins(0)) {
    table.crossover = 0;
  } else if (slope > 0.0) {
    // Smallest k with gap < k * slope; nudged past rounding at exact multiples.
    auto k = static_cast<std::int64_t>(std::floor(gap / slope)) + 1;
    while (k > 0 && lift_wins(k - 1)) --k;
    while (!lift_wins(k)) ++k;
    table.crossover = k;
  }

  std::vector<std::int64_t> ks(output_lengths);
  for (auto k : ks) {
    if (k < 0) throw ValidationError("output_lengths", "must be >= 0");
  }
  if (table.crossover) ks.push_back(*table.crossover);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (auto k : ks) table.rows.push_back({k, lift_total(k), icl_total(k)});
  return table;
}

std::string CrossoverTable::csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "output_len,lift_total,icl_total\n";
  for (const auto& r : rows) os << r.output_len << ',' << r.lift_total << ',' << r.icl_total << '\n';
  return os.str();
}

std::string CrossoverTable::summary() const {
  std::ostringstream os;
  os << "context_len " << context_len << ", lift ttft " << ttft_lift << " s: ";
  if (crossover) {
    os << "LIFT is faster from " << *crossover << " output tokens\n";
  } else {
    os << "no crossover\n";
  }
  return os.str();
}

void to_json(json& j, const CrossoverTable& v) {
  json rows = json::array();
  for (const auto& r : v.rows) {
    rows.push_back({{"output_len", r.output_len}, {"lift_total", r.lift_total}, {"icl_total", r.icl_total}});
  }
  j = json{{"context_len", v.context_len},
           {"ttft_lift", v.ttft_lift},
           {"crossover", v.crossover ? json(*v.crossover) : json(nullptr)},
           {"rows", std::move(rows)}};
}

}  // namespace lift
