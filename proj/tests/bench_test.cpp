// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "lift/benchkit.hpp"
#include "lift/codec.hpp"
#include "lift/errors.hpp"

using namespace lift;

namespace {

CostParams params(double g, int p, double t) {
  CostParams c;
  c.gen_latency_per_sentence = g;
  c.producer_parallelism = p;
  c.train_time_per_batch = t;
  return c;
}

// Independent closed form for epoch-1 completion of a sequential trainer:
// max over batches b of ready_b + (B - b) * t.
Micros epoch1_oracle(int n, Micros g, int p, Micros t, int batch, int m, bool pipelined) {
  const std::int64_t items = static_cast<std::int64_t>(n) * m;
  const std::int64_t B = (items + batch - 1) / batch;
  const Micros span = ((n - 1) / p + 1) * g;
  Micros best = 0;
  for (std::int64_t b = 0; b < B; ++b) {
    const auto last = std::min<std::int64_t>((b + 1) * batch, items) - 1;
    const Micros ready = pipelined ? ((last / m) / p + 1) * g : span;
    best = std::max(best, ready + (B - b) * t);
  }
  return best;
}

}  // namespace

TEST_CASE("simulator worked examples") {
  SUBCASE("pipelining wins at the reference point") {
    const auto c = params(0.1, 8, 0.05);
    const auto pipe = simulate_schedule(64, c, true, 1, 16, 5);
    const auto serial = simulate_schedule(64, c, false, 1, 16, 5);
    CHECK(pipe.batches_per_epoch == 20);
    CHECK(serial.generation_span == 800000);
    CHECK(serial.epoch1_done == 800000 + 20 * 50000);
    CHECK(pipe.epoch1_done == 1100000);
    CHECK(pipe.epoch1_done < serial.epoch1_done);
  }
  SUBCASE("free training makes the schedules equal") {
    const auto c = params(0.1, 1, 0.0);
    CHECK(simulate_schedule(10, c, true, 1, 4, 3).epoch1_done ==
          simulate_schedule(10, c, false, 1, 4, 3).epoch1_done);
  }
  SUBCASE("instant generation leaves only the training span") {
    const auto c = params(0.0, 3, 0.02);
    for (bool pipelined : {true, false}) {
      const auto tl = simulate_schedule(9, c, pipelined, 2, 4, 2);
      CHECK(tl.batches_per_epoch == 5);
      CHECK(tl.epoch1_done == 5 * 20000);
      CHECK(tl.training_done == 10 * 20000);
    }
  }
  SUBCASE("a single batch cannot start before generation ends") {
    const auto c = params(0.1, 2, 0.05);
    CHECK(simulate_schedule(4, c, true, 1, 64, 2).epoch1_done ==
          simulate_schedule(4, c, false, 1, 64, 2).epoch1_done);
  }
}

TEST_CASE("simulator against the closed form, lower bound and event log") {
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 300; ++round) {
    const int n = 1 + static_cast<int>(rng() % 120);
    const int p = 1 + static_cast<int>(rng() % 12);
    const int batch = 1 + static_cast<int>(rng() % 40);
    const int m = 1 + static_cast<int>(rng() % 8);
    const int epochs = 1 + static_cast<int>(rng() % 3);
    const Micros g = rng() % 5 == 0 ? 0 : static_cast<Micros>(rng() % 300000);
    const Micros t = rng() % 5 == 0 ? 0 : static_cast<Micros>(rng() % 200000);
    auto c = params(g / 1e6, p, t / 1e6);
    c.lift_per_token_decode_cost = 0.003;
    CAPTURE(n);
    CAPTURE(p);
    CAPTURE(batch);
    CAPTURE(m);
    const auto pipe = simulate_schedule(n, c, true, epochs, batch, m);
    const auto serial = simulate_schedule(n, c, false, epochs, batch, m);
    CHECK(pipe.epoch1_done == epoch1_oracle(n, g, p, t, batch, m, true));
    CHECK(serial.epoch1_done == epoch1_oracle(n, g, p, t, batch, m, false));
    CHECK(pipe.epoch1_done <= serial.epoch1_done);
    const Micros waves = (n + p - 1) / p;
    CHECK(pipe.epoch1_done >= std::max(waves * g, pipe.batches_per_epoch * t));
    CHECK(pipe.training_done == pipe.epoch1_done + (epochs - 1) * pipe.batches_per_epoch * t);
    CHECK(pipe.first_answer_token == pipe.training_done + 3000);

    // events are time ordered and complete
    const auto& ev = pipe.events;
    CHECK(std::is_sorted(ev.begin(), ev.end(), [](const SimEvent& a, const SimEvent& b) { return a.t < b.t; }));
    CHECK(std::count_if(ev.begin(), ev.end(), [](const SimEvent& e) { return e.kind == EventKind::qa_arrived; }) ==
          n * m);
    CHECK(std::count_if(ev.begin(), ev.end(), [](const SimEvent& e) { return e.kind == EventKind::batch_trained; }) ==
          epochs * pipe.batches_per_epoch);
    const auto metrics = pipe.metrics();
    CHECK_NOTHROW(metrics.validate());
    CHECK(*metrics.ttft() == doctest::Approx(pipe.first_answer_token / 1e6));
  }
}

TEST_CASE("simulator is deterministic and validates input") {
  const auto c = params(0.07, 3, 0.011);
  CHECK(simulate_schedule(33, c, true, 2, 8, 4) == simulate_schedule(33, c, true, 2, 8, 4));
  CHECK_THROWS_AS(simulate_schedule(0, c, true, 1, 8, 4), ValidationError);
  CHECK_THROWS_AS(simulate_schedule(3, c, true, 0, 8, 4), ValidationError);
  CHECK_THROWS_AS(simulate_schedule(3, c, true, 1, 0, 4), ValidationError);
  CHECK_THROWS_AS(simulate_schedule(3, params(0.1, 0, 0.1), true, 1, 8, 4), ValidationError);
  CHECK_THROWS_AS(simulate_schedule(3, params(-0.1, 1, 0.1), true, 1, 8, 4), ValidationError);
}

TEST_CASE("measure_ttft") {
  PipelineMetrics m;
  m.events = {{EventKind::input_submitted, 1.0},
              {EventKind::training_done, 7.0},
              {EventKind::first_answer_token, 8.2}};
  CHECK(measure_ttft([&] { return m; }) == doctest::Approx(7.2));
  m.events.pop_back();
  try {
    measure_ttft([&] { return m; });
    FAIL("expected MissingEvent");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingEvent);
  }
  const auto c = params(0.05, 2, 0.01);
  CHECK(measure_ttft([&] { return simulate_schedule(12, c, true, 1, 4, 2).metrics(); }) ==
        measure_ttft([&] { return simulate_schedule(12, c, true, 1, 4, 2).metrics(); }));
}

TEST_CASE("crossover analysis") {
  CostParams c;
  c.icl_prefill_cost.coeffs = {1.0};
  c.icl_per_token_decode_cost.coeffs = {0.25};
  c.lift_per_token_decode_cost = 0.125;

  SUBCASE("gap divisible by the slope difference needs one more token") {
    const auto t = crossover_analysis(c, 100, 3.0, {0, 8, 32});
    REQUIRE(t.crossover);
    CHECK(*t.crossover == 17);
    std::vector<std::int64_t> ks;
    for (const auto& r : t.rows) ks.push_back(r.output_len);
    CHECK(ks == std::vector<std::int64_t>{0, 8, 17, 32});
    CHECK(t.rows[1] == CrossoverRow{8, 4.0, 3.0});
    CHECK(t.rows[2] == CrossoverRow{17, 5.125, 5.25});
  }
  SUBCASE("otherwise the ceiling") {
    const auto t = crossover_analysis(c, 100, 3.05, {});
    CHECK(*t.crossover == 17);
    CHECK(t.rows.size() == 1);
  }
  SUBCASE("lift already faster") {
    CHECK(*crossover_analysis(c, 100, 0.5, {4}).crossover == 0);
  }
  SUBCASE("equal slopes") {
    c.lift_per_token_decode_cost = 0.25;
    CHECK_FALSE(crossover_analysis(c, 100, 3.0, {0, 100}).crossover);
    CHECK(*crossover_analysis(c, 100, 0.9, {}).crossover == 0);
    CHECK_FALSE(crossover_analysis(c, 100, 1.0, {}).crossover);
  }
  SUBCASE("decode cost grows with context") {
    c.icl_prefill_cost.coeffs = {0.0, 1e-4};
    c.icl_per_token_decode_cost.coeffs = {0.01, 1e-6};
    c.lift_per_token_decode_cost = 0.01;
    // prefill 0.8 s and 0.018 s per token at 8000; slope 0.008
    const auto t = crossover_analysis(c, 8000, 2.004, {0, 1024});
    CHECK(*t.crossover == 151);
    CHECK(t.rows.back().icl_total == doctest::Approx(0.8 + 1024 * 0.018));
  }
  SUBCASE("random analytic agreement") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      CostParams r;
      r.icl_prefill_cost.coeffs = {static_cast<double>(rng() % 1000) / 100.0};
      r.lift_per_token_decode_cost = static_cast<double>(rng() % 100) / 1000.0;
      r.icl_per_token_decode_cost.coeffs = {r.lift_per_token_decode_cost + (1 + rng() % 100) / 1000.0};
      const double ttft = static_cast<double>(rng() % 3000) / 100.0;
      const auto t = crossover_analysis(r, 1, ttft, {});
      REQUIRE(t.crossover);
      const auto k = *t.crossover;
      auto wins = [&](std::int64_t x) {
        return ttft + x * r.lift_per_token_decode_cost <
               r.icl_prefill_cost.coeffs[0] + x * r.icl_per_token_decode_cost.coeffs[0];
      };
      CHECK(wins(k));
      if (k > 0) CHECK_FALSE(wins(k - 1));
    }
  }
  SUBCASE("output and validation") {
    CHECK_THROWS_AS(crossover_analysis(c, 100, 1.0, {-1}), ValidationError);
    CHECK_THROWS_AS(crossover_analysis(c, 100, -1.0, {}), ValidationError);
    const auto t = crossover_analysis(c, 100, 3.0, {0});
    CHECK(t.csv().starts_with("output_len,lift_total,icl_total\n0,3,1\n"));
    CHECK(t.summary().find("from 17 output tokens") != std::string::npos);
    const json j = t;
    CHECK(j["crossover"] == 17);
    CHECK(j["rows"].size() == 2);
  }
}

TEST_CASE("cost params json") {
  CostParams c = params(0.2, 6, 0.03);
  c.icl_prefill_cost.coeffs = {0.1, 2e-4};
  c.lift_per_token_decode_cost = 0.02;
  const json j = c;
  CHECK(j.get<CostParams>() == c);
  CHECK(json::object().get<CostParams>() == CostParams{});
  CHECK_THROWS_AS((json{{"producer_parallelism", 0}}.get<CostParams>()), ValidationError);
  CHECK_THROWS_AS((json{{"gen_latency", 1}}.get<CostParams>()), ValidationError);
  CHECK(Polynomial{{1, 2, 3}}(2.0) == 17.0);
  CHECK(Polynomial{}(5.0) == 0.0);
}
