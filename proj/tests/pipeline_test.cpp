// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <set>

#include "lift/bounded_queue.hpp"
#include "lift/codec.hpp"
#include "lift/digest.hpp"
#include "lift/errors.hpp"
#include "lift/pipeline.hpp"
#include "lift/trainer_http.hpp"
#include "support.hpp"

using namespace lift;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Validation;
}

QAPair qa(int s, int i) { return QAPair{"d", s, i, "q", "a", "g", "h"}; }
RawSegment seg(int i) { return RawSegment{"d", i, "text", 8}; }

std::vector<int> sizes(const std::vector<TaskBatch>& batches) {
  std::vector<int> out;
  for (const auto& b : batches) out.push_back(static_cast<int>(b.items.size()));
  return out;
}

// Wraps a trainer; checks calls never overlap and can fail on demand.
class ProbeTrainer final : public Trainer {
 public:
  explicit ProbeTrainer(Trainer& inner) : inner_(inner) {}
  std::string create_job(const TrainerJob& job) override { return inner_.create_job(job); }
  BatchLossReport train_batch(const std::string& h, const TaskBatch& b) override {
    if (in_flight_.exchange(true)) overlapped_ = true;
    const int n = ++batches_;
    if (fail_at_ > 0 && n == fail_at_) {
      in_flight_ = false;
      throw Error(ErrorKind::TrainerUnavailable, "worker went away");
    }
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    auto r = inner_.train_batch(h, b);
    in_flight_ = false;
    return r;
  }
  std::string finalize(const std::string& h) override { return inner_.finalize(h); }
  std::string generate(const std::string& h, const std::string& p, int n, const Decoding& d) override {
    return inner_.generate(h, p, n, d);
  }
  std::size_t tokenize(std::string_view t) override { return inner_.tokenize(t); }

  int fail_at_ = 0;
  std::chrono::microseconds delay_{0};
  std::atomic<bool> overlapped_{false};
  std::atomic<int> batches_{0};

 private:
  Trainer& inner_;
  std::atomic<bool> in_flight_{false};
};

struct Run {
  RunReport report;
  std::size_t generator_calls = 0;
};

Run run(const Document& doc, const GenerationConfig& gen, const PipelineConfig& pipe,
        ScriptedOptions opts = {}, const std::string& job_id = "job") {
  ScriptedChatClient client(opts);
  auto trainer = test::mock_for(doc.text);
  LiftRequest req{doc, gen, SegmenterConfig{}, pipe, test::job_for(pipe, job_id)};
  Run r;
  r.report = run_lift(req, *trainer, &client);
  r.generator_calls = client.calls();
  return r;
}

}  // namespace

TEST_CASE("assemble_batches") {
  std::vector<TrainingItem> items;
  for (int i = 0; i < 10; ++i) items.emplace_back(qa(i, 0));
  CHECK(sizes(assemble_batches(items, 4, 1)) == std::vector<int>{4, 4, 2});
  items.resize(4);
  CHECK(sizes(assemble_batches(items, 4, 1)) == std::vector<int>{4});
  CHECK(assemble_batches({}, 4, 1).empty());
  CHECK_THROWS_AS(assemble_batches(items, 0, 1), ValidationError);

  std::mt19937_64 rng(2);
  for (int round = 0; round < 100; ++round) {
    std::vector<TrainingItem> stream;
    const int n = static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      if (rng() % 3) {
        stream.emplace_back(qa(i, 0));
      } else {
        stream.emplace_back(seg(i));
      }
    }
    const int bs = 1 + static_cast<int>(rng() % 17);
    const auto batches = assemble_batches(stream, bs, 3);
    std::vector<TrainingItem> flat;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      CHECK(batches[b].epoch == 3);
      CHECK(batches[b].batch_index == static_cast<int>(b));
      CHECK_NOTHROW(batches[b].validate(bs));
      if (b + 1 < batches.size()) CHECK(static_cast<int>(batches[b].items.size()) == bs);
      flat.insert(flat.end(), batches[b].items.begin(), batches[b].items.end());
    }
    CHECK(flat == stream);
  }
}

TEST_CASE("mix_segments") {
  std::vector<QAPair> qas;
  for (int i = 0; i < 200; ++i) qas.push_back(qa(i, 0));
  std::vector<RawSegment> segs;
  for (int i = 0; i < 40; ++i) segs.push_back(seg(i));

  const auto plain = mix_segments(qas, segs, 0.0, 1);
  CHECK(plain == std::vector<TrainingItem>(qas.begin(), qas.end()));

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto mixed = mix_segments(qas, segs, 0.1, seed);
    CHECK(mixed == mix_segments(qas, segs, 0.1, seed));
    int in_first_100 = 0;
    for (int i = 0; i < 100; ++i) in_first_100 += std::holds_alternative<RawSegment>(mixed[i]);
    CHECK(in_first_100 >= 9);
    CHECK(in_first_100 <= 11);
    // any window of 1/ratio items holds one segment give or take one
    for (std::size_t w = 0; w + 10 <= 150; ++w) {
      int n = 0;
      for (std::size_t k = w; k < w + 10; ++k) n += std::holds_alternative<RawSegment>(mixed[k]);
      CHECK(n <= 2);
    }
    // relative orders preserved and nothing lost
    int next_q = 0;
    int next_s = 0;
    for (const auto& item : mixed) {
      if (const auto* p = std::get_if<QAPair>(&item)) {
        CHECK(p->sentence_index == next_q++);
      } else {
        CHECK(std::get<RawSegment>(item).segment_index == next_s++);
      }
    }
    CHECK(next_q == 200);
    CHECK(next_s == 40);
  }

  const auto only_segments = mix_segments({}, segs, 0.5, 3);
  CHECK(only_segments == std::vector<TrainingItem>(segs.begin(), segs.end()));
  CHECK_THROWS_AS(mix_segments(qas, segs, 1.5, 0), ValidationError);
}

TEST_CASE("pipeline matches the serial reference over random configurations") {
  std::mt19937_64 rng(23);
  for (int round = 0; round < 12; ++round) {
    const int n = 1 + static_cast<int>(rng() % 30);
    const auto doc = test::doc_of("eq" + std::to_string(round), test::prose(n, rng()));
    auto gen = test::scripted_gen(1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 8));
    PipelineConfig pipe;
    pipe.batch_size = 1 + static_cast<int>(rng() % 20);
    pipe.queue_capacity = pipe.batch_size + static_cast<int>(rng() % 10);
    pipe.epochs = 1 + static_cast<int>(rng() % 3);
    pipe.batch_order = rng() % 2 ? BatchOrder::always_canonical : BatchOrder::arrival_then_canonical;
    CAPTURE(round);
    CAPTURE(n);

    ScriptedOptions opts;
    opts.latency = std::chrono::microseconds(rng() % 2000);
    const auto r = run(doc, gen, pipe, opts);
    ScriptedChatClient oracle_client;
    const auto expected = test::serial_reference(doc, gen, SegmenterConfig{}, pipe, oracle_client);
    for (int e = 1; e <= pipe.epochs; ++e) {
      CHECK(test::sorted(r.report.epoch_items(e)) == expected.at(e));
    }
    CHECK(r.generator_calls == static_cast<std::size_t>(n));
    CHECK(r.report.generator_calls_after_epoch1 == 0);
    CHECK(r.report.queue_high_water <= static_cast<std::size_t>(pipe.queue_capacity));
    for (int e = 2; e <= pipe.epochs; ++e) {
      const auto items = r.report.epoch_items(e);
      CHECK(items == r.report.epoch_items(2));
    }
  }
}

TEST_CASE("later epochs and always_canonical run in canonical order") {
  const auto doc = test::doc_of("canon", test::prose(9));
  PipelineConfig pipe;
  pipe.batch_size = 4;
  pipe.epochs = 3;
  pipe.batch_order = BatchOrder::always_canonical;
  const auto r = run(doc, test::scripted_gen(3, 4), pipe, {std::chrono::microseconds(500), {}});
  std::vector<std::string> canonical;
  for (int s = 0; s < 9; ++s) {
    for (int i = 0; i < 3; ++i) canonical.push_back("qa:" + std::to_string(s) + ":" + std::to_string(i));
  }
  for (int e = 1; e <= 3; ++e) CHECK(r.report.epoch_items(e) == canonical);
  // batch indices restart per epoch and only the last batch is short
  std::vector<std::pair<int, int>> ids;
  for (const auto& l : r.report.losses) ids.emplace_back(l.epoch, l.batch_index);
  CHECK(std::set(ids.begin(), ids.end()).size() == ids.size());
  CHECK(r.report.losses.size() == 3 * 7);
}

TEST_CASE("training overlaps generation and memory stays bounded") {
  const auto doc = test::doc_of("overlap", test::prose(24));
  PipelineConfig pipe;
  pipe.batch_size = 4;
  pipe.queue_capacity = 4;
  auto gen = test::scripted_gen(5, 3);
  ScriptedChatClient client({std::chrono::milliseconds(4), {}});
  auto mock = test::mock_for(doc.text);
  ProbeTrainer trainer(*mock);
  trainer.delay_ = std::chrono::milliseconds(2);
  const auto r = run_lift({doc, gen, SegmenterConfig{}, pipe, test::job_for(pipe)}, trainer, &client);
  CHECK(r.queue_high_water <= 4);
  CHECK(r.queue_high_water >= 1);
  CHECK_FALSE(trainer.overlapped_.load());
  CHECK(r.epoch_items(1).size() == 24 * 5);

  double first_trained = -1;
  double last_arrival = -1;
  for (const auto& e : r.metrics.events) {
    if (e.kind == EventKind::batch_trained && first_trained < 0) first_trained = e.time_s;
    if (e.kind == EventKind::qa_arrived) last_arrival = e.time_s;
  }
  CHECK(first_trained >= 0);
  CHECK(first_trained < last_arrival);
  CHECK_NOTHROW(r.metrics.validate());
  for (auto k : {EventKind::input_submitted, EventKind::sentence_dispatched, EventKind::qa_arrived,
                 EventKind::batch_formed, EventKind::batch_trained, EventKind::training_done}) {
    CHECK(r.metrics.first(k).has_value());
  }
}

TEST_CASE("bounded queue holds popped items until released") {
  BoundedQueue<int> q(2);
  CHECK(q.push(1));
  CHECK(q.push(2));
  std::atomic<bool> pushed{false};
  std::thread producer([&] {
    q.push(3);
    pushed = true;
  });
  CHECK(*q.pop() == 1);
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK_FALSE(pushed.load());  // popped but unreleased still counts
  q.release(1);
  producer.join();
  CHECK(pushed.load());
  CHECK(q.high_water() == 2);
  q.close();
  CHECK(*q.pop() == 2);
  CHECK(*q.pop() == 3);
  CHECK_FALSE(q.pop().has_value());
  CHECK_FALSE(q.push(4));
}

TEST_CASE("rerunning a completed document makes no generator calls") {
  test::TempDir dir;
  const auto doc = test::doc_of("again", test::prose(12));
  PipelineConfig pipe;
  pipe.batch_size = 8;
  pipe.epochs = 3;
  pipe.cache_dir = dir.str();
  const auto gen = test::scripted_gen(4);
  const auto first = run(doc, gen, pipe, {}, "first");
  CHECK(first.generator_calls == 12);
  const auto second = run(doc, gen, pipe, {}, "second");
  CHECK(second.generator_calls == 0);
  CHECK(second.report.resumed_sentences == 12);
  for (int e = 2; e <= 3; ++e) CHECK(second.report.epoch_items(e) == first.report.epoch_items(e));
  CHECK(test::sorted(second.report.epoch_items(1)) == test::sorted(first.report.epoch_items(1)));
}

TEST_CASE("skipped and partial sentences") {
  const auto doc = test::doc_of("skips", test::prose(6));
  auto gen = test::scripted_gen(3, 2);
  gen.max_retries = 1;
  test::FnChatClient client([](const ChatRequest& req, int) -> std::string {
    const auto target = parse_user_message(req.messages[1].content).target_sentence;
    if (target.find("1801") != std::string::npos) return "no json here";
    if (target.find("1803") != std::string::npos) {
      return R"({"qa_list":[{"question":"only one?","answer":")" + target + R"("}]})";
    }
    return scripted_qa_response(target, 3);
  });
  PipelineConfig pipe;
  pipe.batch_size = 4;
  auto mock = test::mock_for(doc.text);
  const auto r = run_lift({doc, gen, SegmenterConfig{}, pipe, test::job_for(pipe)}, *mock, &client);
  REQUIRE(r.skipped.size() == 1);
  CHECK(r.skipped[0].sentence_index == 1);
  CHECK(r.skipped[0].attempts == 2);
  CHECK(r.epoch_items(1).size() == 4 * 3 + 1);
}

TEST_CASE("a document with no usable sentence aborts with NoTrainingData") {
  const auto doc = test::doc_of("empty", test::prose(5));
  test::FnChatClient client([](const ChatRequest&, int) { return std::string(R"({"qa_list":[]})"); });
  for (auto order : {BatchOrder::arrival_then_canonical, BatchOrder::always_canonical}) {
    PipelineConfig pipe;
    pipe.batch_order = order;
    auto mock = test::mock_for(doc.text);
    CHECK(kind_of([&] {
            run_lift({doc, test::scripted_gen(2), SegmenterConfig{}, pipe, test::job_for(pipe)}, *mock,
                     &client);
          }) == ErrorKind::NoTrainingData);
  }
}

TEST_CASE("finetune_raw trains raw segments and never calls the generator") {
  const auto doc = test::doc_of("raw", test::prose(80));
  SegmenterConfig seg;
  seg.raw_segment_token_len = 64;
  seg.token_estimator = TokenEstimatorKind::whitespace_words;
  PipelineConfig pipe;
  pipe.mode = TrainingMode::finetune_raw;
  pipe.batch_size = 3;
  pipe.epochs = 2;
  auto mock = test::mock_for(doc.text);
  ScriptedChatClient client;
  const auto r = run_lift({doc, test::scripted_gen(2), seg, pipe, test::job_for(pipe)}, *mock, &client);
  CHECK(client.calls() == 0);
  CHECK(r.generator_calls == 0);
  const auto segs = chunk_raw(doc, seg, TokenEstimator(TokenEstimatorKind::external,
                                                       [&](std::string_view t) { return mock->tokenize(t); }));
  std::vector<std::string> expected;
  for (const auto& s : segs) expected.push_back(item_key(s));
  CHECK(r.epoch_items(1) == expected);
  CHECK(r.epoch_items(2) == expected);
  // without a generator too
  auto mock2 = test::mock_for(doc.text);
  CHECK_NOTHROW(run_lift({doc, test::scripted_gen(2), seg, pipe, test::job_for(pipe)}, *mock2, nullptr));
}

TEST_CASE("lift_plus_segments mixes raw segments into every epoch") {
  const auto doc = test::doc_of("mix", test::prose(30));
  SegmenterConfig seg;
  seg.raw_segment_token_len = 40;
  PipelineConfig pipe;
  pipe.mode = TrainingMode::lift_plus_segments;
  pipe.segment_ratio = 0.2;
  pipe.epochs = 2;
  pipe.batch_size = 8;
  auto mock = test::mock_for(doc.text);
  ScriptedChatClient client;
  const auto r = run_lift({doc, test::scripted_gen(2), seg, pipe, test::job_for(pipe)}, *mock, &client);
  const auto n_segs = chunk_raw(doc, seg, TokenEstimator()).size();
  for (int e = 1; e <= 2; ++e) {
    const auto items = r.epoch_items(e);
    const auto segs = std::count_if(items.begin(), items.end(), [](const auto& k) { return k.starts_with("seg:"); });
    CHECK(static_cast<std::size_t>(segs) == n_segs);
    CHECK(items.size() == 60 + n_segs);
  }
}

TEST_CASE("loss is nonincreasing across epochs on overfittable data") {
  const auto doc = test::doc_of("fit", test::prose(10) + " alpha beta gamma.");
  test::FnChatClient client([](const ChatRequest&, int) {
    return std::string(R"({"qa_list":[{"question":"what?","answer":"alpha beta gamma."}]})");
  });
  for (double lr : {1e-4, 1e-2, 0.1}) {
    CAPTURE(lr);
    PipelineConfig pipe;
    pipe.batch_size = 4;
    pipe.epochs = 5;
    auto mock = test::mock_for(doc.text);
    const auto r = run_lift({doc, test::scripted_gen(1), SegmenterConfig{}, pipe, test::job_for(pipe, "fit", lr)},
                            *mock, &client);
    const auto losses = r.epoch_mean_loss();
    REQUIRE(losses.size() == 5);
    for (std::size_t e = 1; e < losses.size(); ++e) CHECK(losses[e] <= losses[e - 1]);
  }
}

TEST_CASE("trainer failures abort the run") {
  const auto doc = test::doc_of("abort", test::prose(20));
  PipelineConfig pipe;
  pipe.batch_size = 4;
  pipe.queue_capacity = 4;
  const auto gen = test::scripted_gen(3, 4);

  SUBCASE("unreachable worker") {
    auto ep = TrainerEndpoint::remote("http://127.0.0.1:1");
    ep.timeout = std::chrono::milliseconds(300);
    HttpTrainerClient client(ep);
    ScriptedChatClient scripted;
    CHECK(kind_of([&] { run_lift({doc, gen, SegmenterConfig{}, pipe, test::job_for(pipe)}, client, &scripted); }) ==
          ErrorKind::TrainerUnavailable);
  }
  SUBCASE("worker dies mid-run while producers are blocked") {
    auto mock = test::mock_for(doc.text);
    ProbeTrainer trainer(*mock);
    trainer.fail_at_ = 2;
    ScriptedChatClient scripted({std::chrono::milliseconds(1), {}});
    CHECK(kind_of([&] { run_lift({doc, gen, SegmenterConfig{}, pipe, test::job_for(pipe)}, trainer, &scripted); }) ==
          ErrorKind::TrainerUnavailable);
  }
  SUBCASE("worker dies behind the http protocol") {
    auto mock = test::mock_for(doc.text);
    auto server = std::make_unique<TrainerHttpServer>(*mock);
    server->start();
    auto ep = TrainerEndpoint::remote(server->url());
    ep.timeout = std::chrono::milliseconds(500);
    HttpTrainerClient client(ep);
    ProbeTrainer trainer(client);
    trainer.delay_ = std::chrono::milliseconds(5);
    ScriptedChatClient scripted({std::chrono::milliseconds(2), {}});
    std::thread killer([&] {
      std::this_thread::sleep_for(std::chrono::milliseconds(30));
      server->stop();
    });
    CHECK(kind_of([&] { run_lift({doc, gen, SegmenterConfig{}, pipe, test::job_for(pipe)}, trainer, &scripted); }) ==
          ErrorKind::TrainerUnavailable);
    killer.join();
  }
}

TEST_CASE("replay from a completed cache") {
  test::TempDir dir;
  const auto doc = test::doc_of("replay", test::prose(37));
  PipelineConfig pipe;
  pipe.cache_dir = dir.str();
  pipe.batch_size = 16;
  auto gen = test::scripted_gen(1);
  const auto key = CacheKey::from(doc, gen);

  CHECK(kind_of([&] { replay_from_cache(key, pipe); }) == ErrorKind::CacheIncomplete);

  ScriptedChatClient client;
  const auto g = generate_tasks(doc, gen, SegmenterConfig{}, pipe, client);
  CHECK(g.complete);
  CHECK(g.qa_pairs == 37);

  const auto a = replay_from_cache(key, pipe);
  const auto b = replay_from_cache(key, pipe);
  CHECK(sizes(a) == std::vector<int>{16, 16, 5});
  std::vector<std::string> order;
  for (const auto& batch : a) {
    for (const auto& item : batch.items) order.push_back(item_key(item));
  }
  for (int s = 0; s < 37; ++s) CHECK(order[static_cast<std::size_t>(s)] == "qa:" + std::to_string(s) + ":0");
  CHECK(sha256_hex(json(a).dump()) == sha256_hex(json(b).dump()));

  pipe.cache_dir.clear();
  CHECK(kind_of([&] { replay_from_cache(key, pipe); }) == ErrorKind::CacheIncomplete);
}

TEST_CASE("generate_tasks rerun and skipped reporting") {
  test::TempDir dir;
  const auto doc = test::doc_of("gen", test::prose(8));
  PipelineConfig pipe;
  pipe.cache_dir = dir.str();
  auto gen = test::scripted_gen(2);
  gen.max_retries = 0;
  test::FnChatClient flaky([](const ChatRequest& req, int) -> std::string {
    const auto target = parse_user_message(req.messages[1].content).target_sentence;
    if (target.find("1804") != std::string::npos) throw Error(ErrorKind::Transport, "boom");
    return scripted_qa_response(target, 2);
  });
  const auto first = generate_tasks(doc, gen, SegmenterConfig{}, pipe, flaky);
  CHECK(first.complete);
  CHECK(first.generator_calls == 8);
  REQUIRE(first.skipped.size() == 1);
  CHECK(first.skipped[0].sentence_index == 4);
  CHECK(first.qa_pairs == 14);

  const auto second = generate_tasks(doc, gen, SegmenterConfig{}, pipe, flaky);
  CHECK(second.generator_calls == 0);
  CHECK(second.resumed_sentences == 8);
  CHECK(second.cache_digest == first.cache_digest);
  CHECK(second.skipped.size() == 1);
}

TEST_CASE("request validation") {
  const auto doc = test::doc_of("v", "One. Two.");
  PipelineConfig pipe;
  auto job = test::job_for(pipe);
  job.batch_size = 3;
  auto mock = test::mock_for(doc.text);
  ScriptedChatClient client;
  CHECK_THROWS_AS(run_lift({doc, test::scripted_gen(2), SegmenterConfig{}, pipe, job}, *mock, &client),
                  ValidationError);
  pipe.queue_capacity = 4;
  pipe.batch_size = 8;
  CHECK_THROWS_AS(pipe.validate(), ValidationError);
  PipelineConfig ok;
  CHECK_THROWS_AS(run_lift({doc, test::scripted_gen(2), SegmenterConfig{}, ok, test::job_for(ok)}, *mock, nullptr),
                  ValidationError);
}

TEST_CASE("run report echoes its configuration") {
  const auto doc = test::doc_of("echo", test::prose(4));
  PipelineConfig pipe;
  pipe.epochs = 2;
  const auto r = run(doc, test::scripted_gen(2), pipe);
  const json j = r.report;
  CHECK(j["config"]["generator"]["qas_per_sentence"] == 2);
  CHECK(j["config"]["pipeline"]["epochs"] == 2);
  CHECK(j["config"]["job"]["job_id"] == "job");
  CHECK(j["decoding"] == "greedy");
  CHECK(j["batches"].size() == r.report.losses.size());
  CHECK(j["adapter_ref"].get<std::string>() == r.report.adapter_ref);
  CHECK_FALSE(r.report.adapter_ref.empty());
}
