// SPDX-License-Identifier: Apache-2.0
#include "lift/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <stop_token>
#include <thread>

#include "lift/bounded_queue.hpp"
#include "lift/codec.hpp"
#include "lift/config.hpp"
#include "lift/digest.hpp"
#include "lift/errors.hpp"
#include "lift/mock_trainer.hpp"
#include "lift/trainer_http.hpp"

namespace lift {
namespace {

constexpr std::array<std::pair<BatchOrder, std::string_view>, 2> kOrders{{
    {BatchOrder::arrival_then_canonical, "arrival_then_canonical"},
    {BatchOrder::always_canonical, "always_canonical"},
}};

constexpr std::array<std::pair<TrainingMode, std::string_view>, 3> kModes{{
    {TrainingMode::lift_qa, "lift_qa"},
    {TrainingMode::finetune_raw, "finetune_raw"},
    {TrainingMode::lift_plus_segments, "lift_plus_segments"},
}};

class CountingClient final : public ChatClient {
 public:
  explicit CountingClient(ChatClient& inner) : inner_(inner) {}
  std::string complete(const ChatRequest& request) override {
    calls_.fetch_add(1);
    return inner_.complete(request);
  }
  std::int64_t calls() const { return calls_.load(); }

 private:
  ChatClient& inner_;
  std::atomic<std::int64_t> calls_{0};
};

// Producer threads walking the sentences in index order. A sentence already
// in the cache is replayed from it instead of hitting the generator. When the
// last worker exits after every sentence was delivered, the cache is marked
// complete and on_done(true) fires; on error or cancellation, on_done(false).
class ProducerPool {
 public:
  using Sink = std::function<bool(const QAPair&)>;

  ProducerPool(const std::vector<SentenceUnit>& units, const GenerationConfig& cfg,
               ChatClient& client, TaskCache& cache, MetricsLog& metrics, Sink sink,
               std::function<void(bool)> on_done, std::function<void()> on_cancel)
      : units_(units),
        cfg_(cfg),
        client_(client),
        cache_(cache),
        metrics_(metrics),
        sink_(std::move(sink)),
        on_done_(std::move(on_done)),
        on_cancel_(std::move(on_cancel)) {}

  ~ProducerPool() {
    cancel();
    join();
  }

  void start(int parallelism) {
    const int n = std::max(1, std::min<int>(parallelism, static_cast<int>(units_.size())));
    active_ = n;
    for (int i = 0; i < n; ++i) {
      threads_.emplace_back([this, token = stop_.get_token()] { work(token); });
    }
  }

  void cancel() {
    stop_.request_stop();
    if (on_cancel_) on_cancel_();
  }

  void join() {
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  std::exception_ptr error() const {
    std::lock_guard lock(mutex_);
    return error_;
  }

  int resumed() const { return resumed_.load(); }

  std::vector<SkippedSentence> skipped() const {
    std::lock_guard lock(mutex_);
    auto out = skipped_;
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.sentence_index < b.sentence_index;
    });
    return out;
  }

 private:
  void work(std::stop_token stop) {
    try {
      while (!stop.stop_requested()) {
        const int i = next_.fetch_add(1);
        if (i >= static_cast<int>(units_.size())) break;
        if (!produce(units_[static_cast<std::size_t>(i)])) break;
        delivered_.fetch_add(1);
      }
    } catch (...) {
      {
        std::lock_guard lock(mutex_);
        if (!error_) error_ = std::current_exception();
      }
      cancel();
    }
    if (active_.fetch_sub(1) == 1) finish();
  }

  bool produce(const SentenceUnit& unit) {
    std::vector<QAPair> pairs;
    if (auto cached = cache_.sentence(unit.sentence_index)) {
      resumed_.fetch_add(1);
      if (cached->status == OutcomeStatus::skipped) {
        note_skipped({unit.sentence_index, cached->attempts, "skipped in an earlier run"});
      }
      pairs = std::move(cached->pairs);
    } else {
      metrics_.record(EventKind::sentence_dispatched);
      auto outcome = generate_for_sentence(unit, cfg_, client_);
      cache_.append(outcome);
      if (outcome.status == OutcomeStatus::skipped) {
        note_skipped({unit.sentence_index, outcome.attempts, outcome.last_error});
      }
      pairs = std::move(outcome.pairs);
    }
    for (const auto& qa : pairs) {
      if (!sink_(qa)) return false;
    }
    return true;
  }

  void note_skipped(SkippedSentence s) {
    std::lock_guard lock(mutex_);
    skipped_.push_back(std::move(s));
  }

  void finish() {
    bool ok = delivered_.load() == static_cast<int>(units_.size()) && !error();
    if (ok) {
      try {
        cache_.mark_complete(static_cast<int>(units_.size()));
      } catch (...) {
        std::lock_guard lock(mutex_);
        error_ = std::current_exception();
        ok = false;
      }
    }
    on_done_(ok);
  }

  const std::vector<SentenceUnit>& units_;
  const GenerationConfig& cfg_;
  ChatClient& client_;
  TaskCache& cache_;
  MetricsLog& metrics_;
  Sink sink_;
  std::function<void(bool)> on_done_;
  std::function<void()> on_cancel_;

  std::stop_source stop_;
  std::vector<std::thread> threads_;
  std::atomic<int> next_{0};
  std::atomic<int> active_{0};
  std::atomic<int> delivered_{0};
  std::atomic<int> resumed_{0};
  mutable std::mutex mutex_;
  std::exception_ptr error_;
  std::vector<SkippedSentence> skipped_;
};

std::vector<std::string> keys_of(const TaskBatch& batch) {
  std::vector<std::string> keys;
  keys.reserve(batch.items.size());
  for (const auto& item : batch.items) keys.push_back(item_key(item));
  return keys;
}

std::vector<TrainingItem> canonical_items(const std::vector<QAPair>& pairs,
                                          const std::vector<RawSegment>& segments,
                                          const PipelineConfig& cfg, int epoch) {
  if (cfg.mode == TrainingMode::lift_plus_segments) {
    return mix_segments(pairs, segments, cfg.segment_ratio,
                        mix_seed(cfg.seed + static_cast<std::uint64_t>(epoch)));
  }
  return {pairs.begin(), pairs.end()};
}

[[noreturn]] void no_training_data(const std::string& doc_id) {
  throw Error(ErrorKind::NoTrainingData, "no sentence of '" + doc_id + "' produced a QA pair");
}

}  // namespace

std::string_view to_string(BatchOrder order) {
  for (const auto& [k, n] : kOrders) {
    if (k == order) return n;
  }
  return "unknown";
}

std::string_view to_string(TrainingMode mode) {
  for (const auto& [k, n] : kModes) {
    if (k == mode) return n;
  }
  return "unknown";
}

BatchOrder batch_order_from_string(std::string_view s) {
  for (const auto& [k, n] : kOrders) {
    if (n == s) return k;
  }
  throw ValidationError("pipeline.batch_order", "unknown value '" + std::string(s) + "'");
}

TrainingMode training_mode_from_string(std::string_view s) {
  for (const auto& [k, n] : kModes) {
    if (n == s) return k;
  }
  throw ValidationError("pipeline.mode", "unknown value '" + std::string(s) + "'");
}

void PipelineConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
  if (epochs < 1) throw ValidationError("epochs", "must be >= 1");
  if (queue_capacity < batch_size) throw ValidationError("queue_capacity", "must be >= batch_size");
  if (!(segment_ratio >= 0.0 && segment_ratio <= 1.0)) {
    throw ValidationError("segment_ratio", "must be in [0, 1]");
  }
}

void LiftRequest::validate() const {
  doc.validate();
  segmenter.validate();
  pipeline.validate();
  job.validate();
  if (pipeline.mode != TrainingMode::finetune_raw) generation.validate();
  if (job.batch_size != pipeline.batch_size) {
    throw ValidationError("job.batch_size", "must equal pipeline.batch_size");
  }
  if (job.epochs != pipeline.epochs) throw ValidationError("job.epochs", "must equal pipeline.epochs");
}

std::vector<double> RunReport::epoch_mean_loss() const {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& l : losses) {
    auto& [sum, n] = acc[l.epoch];
    sum += l.mean_loss * l.item_count;
    n += l.item_count;
  }
  std::vector<double> out;
  for (const auto& [_, v] : acc) out.push_back(v.first / v.second);
  return out;
}

std::vector<std::string> RunReport::epoch_items(int epoch) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i].epoch != epoch) continue;
    out.insert(out.end(), batch_items[i].begin(), batch_items[i].end());
  }
  return out;
}

void to_json(json& j, const SkippedSentence& v) {
  j = json{{"sentence_index", v.sentence_index}, {"attempts", v.attempts}, {"error", v.error}};
}

void to_json(json& j, const RunReport& v) {
  json batches = json::array();
  for (std::size_t i = 0; i < v.losses.size(); ++i) {
    json b = v.losses[i];
    b["items"] = v.batch_items[i];
    batches.push_back(std::move(b));
  }
  j = json{{"doc_id", v.doc_id},
           {"job_id", v.job_id},
           {"adapter_ref", v.adapter_ref},
           {"decoding", v.decoding},
           {"config",
            {{"generator", v.generation},
             {"segmenter", v.segmenter},
             {"pipeline", v.pipeline},
             {"job", v.job}}},
           {"n_sentences", v.n_sentences},
           {"resumed_sentences", v.resumed_sentences},
           {"generator_calls", v.generator_calls},
           {"generator_calls_after_epoch1", v.generator_calls_after_epoch1},
           {"queue_high_water", v.queue_high_water},
           {"skipped", v.skipped},
           {"epoch_mean_loss", v.epoch_mean_loss()},
           {"batches", std::move(batches)},
           {"metrics", v.metrics}};
}

void to_json(json& j, const GenerationReport& v) {
  j = json{{"doc_id", v.doc_id},
           {"n_sentences", v.n_sentences},
           {"resumed_sentences", v.resumed_sentences},
           {"generator_calls", v.generator_calls},
           {"qa_pairs", v.qa_pairs},
           {"complete", v.complete},
           {"cache_digest", v.cache_digest},
           {"cache_file", v.cache_file},
           {"skipped", v.skipped}};
}

RunReport run_lift(const LiftRequest& req, Trainer& trainer, ChatClient* generator,
                   MetricsLog* external_metrics) {
  req.validate();
  const auto& pipe = req.pipeline;
  const bool wants_qa = pipe.mode != TrainingMode::finetune_raw;
  if (wants_qa && generator == nullptr) {
    throw ValidationError("generator.endpoint_url", "required in mode " + std::string(to_string(pipe.mode)));
  }

  MetricsLog own_metrics;
  MetricsLog& metrics = external_metrics ? *external_metrics : own_metrics;
  metrics.record(EventKind::input_submitted);

  RunReport report;
  report.doc_id = req.doc.doc_id;
  report.generation = req.generation;
  report.segmenter = req.segmenter;
  report.pipeline = pipe;
  report.job = req.job;

  const std::string handle = trainer.create_job(req.job);
  report.job_id = handle;

  auto train = [&](const TaskBatch& batch) {
    metrics.record(EventKind::batch_formed);
    auto loss = trainer.train_batch(handle, batch);
    metrics.record(EventKind::batch_trained);
    report.losses.push_back(loss);
    report.batch_items.push_back(keys_of(batch));
  };

  std::vector<RawSegment> segments;
  if (pipe.mode != TrainingMode::lift_qa) {
    const TokenEstimator estimator(req.segmenter.token_estimator,
                                   [&trainer](std::string_view t) { return trainer.tokenize(t); });
    segments = chunk_raw(req.doc, req.segmenter, estimator);
  }

  if (!wants_qa) {
    const std::vector<TrainingItem> items(segments.begin(), segments.end());
    for (int epoch = 1; epoch <= pipe.epochs; ++epoch) {
      for (const auto& batch : assemble_batches(items, pipe.batch_size, epoch)) train(batch);
    }
  } else {
    const auto units = split_sentences(req.doc, req.segmenter);
    report.n_sentences = static_cast<int>(units.size());
    auto cache = TaskCache::open(pipe.cache_dir, CacheKey::from(req.doc, req.generation));
    CountingClient counting(*generator);

    BoundedQueue<QAPair> queue(static_cast<std::size_t>(pipe.queue_capacity));
    ProducerPool pool(
        units, req.generation, counting, *cache, metrics,
        [&](const QAPair& qa) {
          metrics.record(EventKind::qa_arrived);
          return queue.push(qa);
        },
        [&](bool ok) { ok ? queue.close() : queue.cancel(); }, [&] { queue.cancel(); });

    try {
      pool.start(req.generation.request_parallelism);
      auto rethrow_producer_error = [&] {
        if (auto e = pool.error()) std::rethrow_exception(e);
      };

      if (pipe.batch_order == BatchOrder::arrival_then_canonical) {
        std::optional<SegmentMixer> mixer;
        if (pipe.mode == TrainingMode::lift_plus_segments && pipe.segment_ratio > 0.0) {
          mixer.emplace(pipe.segment_ratio, mix_seed(pipe.seed + 1));
        }
        std::size_t next_segment = 0;
        std::size_t qa_count = 0;
        bool qa_done = false;
        for (int batch_index = 0;; ++batch_index) {
          std::vector<TrainingItem> items;
          std::size_t popped = 0;
          while (static_cast<int>(items.size()) < pipe.batch_size) {
            if (mixer && next_segment < segments.size() && (qa_done || mixer->next_is_segment())) {
              items.emplace_back(segments[next_segment++]);
              continue;
            }
            if (qa_done) break;
            auto qa = queue.pop();
            if (!qa) {
              qa_done = true;
              pool.join();
              rethrow_producer_error();
              if (qa_count == 0) no_training_data(req.doc.doc_id);
              continue;
            }
            ++popped;
            ++qa_count;
            items.emplace_back(std::move(*qa));
          }
          if (items.empty()) break;
          const auto source = source_of(items);
          TaskBatch batch{1, batch_index, std::move(items), source};
          queue.release(popped);
          train(batch);
        }
      } else {
        // Generation runs to completion; the items are read back from the
        // cache in canonical order.
        while (queue.pop()) queue.release(1);
        pool.join();
        rethrow_producer_error();
        const auto pairs = cache->canonical_pairs();
        if (pairs.empty()) no_training_data(req.doc.doc_id);
        for (const auto& batch :
             assemble_batches(canonical_items(pairs, segments, pipe, 1), pipe.batch_size, 1)) {
          train(batch);
        }
      }
    } catch (...) {
      pool.cancel();
      pool.join();
      throw;
    }
    pool.join();
    const auto epoch1_calls = counting.calls();

    if (pipe.epochs > 1) {
      const auto pairs = cache->canonical_pairs();
      for (int epoch = 2; epoch <= pipe.epochs; ++epoch) {
        for (const auto& batch : assemble_batches(canonical_items(pairs, segments, pipe, epoch),
                                                  pipe.batch_size, epoch)) {
          train(batch);
        }
      }
    }
    report.generator_calls = counting.calls();
    report.generator_calls_after_epoch1 = report.generator_calls - epoch1_calls;
    report.resumed_sentences = pool.resumed();
    report.skipped = pool.skipped();
    report.queue_high_water = queue.high_water();
  }

  report.adapter_ref = trainer.finalize(handle);
  metrics.record(EventKind::training_done);
  report.metrics = metrics.snapshot();
  return report;
}

RunReport run_lift(const Document& doc, const GenerationConfig& gen, const SegmenterConfig& seg,
                   const PipelineConfig& pipe, const TrainerJob& job,
                   const TrainerEndpoint& endpoint) {
  endpoint.validate();
  const LiftRequest request{doc, gen, seg, pipe, job};
  std::unique_ptr<ChatClient> generator;
  if (pipe.mode != TrainingMode::finetune_raw) {
    generator = make_chat_client(gen.endpoint_url, "LIFT_GENERATOR_API_KEY");
  }
  if (endpoint.in_process) {
    MockTrainer mock;
    mock.register_model(job.base_model, MockTrainer::vocabulary_from_text(doc.text));
    return run_lift(request, mock, generator.get());
  }
  HttpTrainerClient client(endpoint);
  return run_lift(request, client, generator.get());
}

GenerationReport generate_tasks(const Document& doc, const GenerationConfig& gen,
                                const SegmenterConfig& seg, const PipelineConfig& pipe,
                                ChatClient& generator) {
  doc.validate();
  gen.validate();
  seg.validate();
  pipe.validate();
  const auto units = split_sentences(doc, seg);
  auto cache = TaskCache::open(pipe.cache_dir, CacheKey::from(doc, gen));
  CountingClient counting(generator);
  MetricsLog metrics;
  std::size_t qa_pairs = 0;
  std::mutex count_mutex;
  {
    ProducerPool pool(
        units, gen, counting, *cache, metrics,
        [&](const QAPair&) {
          std::lock_guard lock(count_mutex);
          ++qa_pairs;
          return true;
        },
        [](bool) {}, {});
    pool.start(gen.request_parallelism);
    pool.join();
    if (auto e = pool.error()) std::rethrow_exception(e);

    GenerationReport report;
    report.doc_id = doc.doc_id;
    report.n_sentences = static_cast<int>(units.size());
    report.resumed_sentences = pool.resumed();
    report.generator_calls = counting.calls();
    report.qa_pairs = qa_pairs;
    report.complete = cache->complete();
    report.cache_digest = cache->digest();
    report.cache_file = cache->file() ? cache->file()->string() : std::string();
    report.skipped = pool.skipped();
    return report;
  }
}

}  // namespace lift
