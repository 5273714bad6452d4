// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "lift/chat_client.hpp"
#include "lift/codec.hpp"
#include "lift/mock_trainer.hpp"
#include "lift/pipeline.hpp"
#include "lift/scripted_generator.hpp"
#include "lift/segmenter.hpp"
#include "lift/taskgen.hpp"

namespace lift::test {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "lift") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

// Deterministic prose: n sentences of varying shape, each ending in '.'.
inline std::string prose(int n_sentences, std::uint64_t seed = 7) {
  static const std::vector<std::string> subjects = {
      "The river", "A quiet village", "Old Marta", "The northern road", "Every lantern",
      "The council", "A grey heron", "The mill", "Young Tomas", "The orchard"};
  static const std::vector<std::string> verbs = {"watched", "crossed", "remembered", "carried",
                                                 "avoided", "painted", "followed", "counted"};
  static const std::vector<std::string> objects = {
      "the morning fog", "seven wooden boats", "a letter from the coast",
      "the bells at noon", "twelve sacks of barley", "the bridge near the ford",
      "an unfinished map", "the winter market"};
  std::mt19937_64 rng(seed);
  std::string out;
  for (int i = 0; i < n_sentences; ++i) {
    if (i > 0) out += (i % 7 == 0) ? "\n\n" : " ";
    out += subjects[rng() % subjects.size()] + " " + verbs[rng() % verbs.size()] + " " +
           objects[rng() % objects.size()] + " in year " + std::to_string(1800 + i) + ".";
  }
  return out;
}

inline Document doc_of(const std::string& id, const std::string& text,
                       BenchmarkKind kind = BenchmarkKind::generic) {
  return make_document(id, text, kind, TokenEstimator());
}

inline GenerationConfig scripted_gen(int m, int parallelism = 4) {
  GenerationConfig g;
  g.qas_per_sentence = m;
  g.endpoint_url = "scripted://echo";
  g.model_name = "scripted";
  g.request_parallelism = parallelism;
  return g;
}

inline TrainerJob job_for(const PipelineConfig& pipe, const std::string& id = "job",
                          double lr = 1e-4) {
  TrainerJob j;
  j.job_id = id;
  j.base_model = "mock-base";
  j.learning_rate = lr;
  j.epochs = pipe.epochs;
  j.batch_size = pipe.batch_size;
  return j;
}

inline std::shared_ptr<MockTrainer> mock_for(const std::string& text,
                                              MockTrainerOptions opts = {}) {
  auto t = std::make_shared<MockTrainer>(opts);
  t->register_model("mock-base", MockTrainer::vocabulary_from_text(text));
  return t;
}

// Chat client driven by a callback; counts calls.
class FnChatClient final : public ChatClient {
 public:
  using Fn = std::function<std::string(const ChatRequest&, int call)>;
  explicit FnChatClient(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& request) override {
    const int call = calls_++;
    return fn_(request, call);
  }
  int calls() const { return calls_.load(); }

 private:
  Fn fn_;
  std::atomic<int> calls_{0};
};

// Counts the sentence indices a generator was asked about.
class RecordingClient final : public ChatClient {
 public:
  explicit RecordingClient(ChatClient& inner) : inner_(inner) {}
  std::string complete(const ChatRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      targets_.push_back(parse_user_message(request.messages.at(1).content).target_sentence);
    }
    return inner_.complete(request);
  }
  std::vector<std::string> targets() const {
    std::lock_guard lock(mutex_);
    return targets_;
  }

 private:
  ChatClient& inner_;
  mutable std::mutex mutex_;
  std::vector<std::string> targets_;
};

// Serial reference: generate every sentence in order, then train. Returns
// the per-epoch item keys as sorted multisets.
inline std::map<int, std::vector<std::string>> serial_reference(const Document& doc,
                                                                const GenerationConfig& gen,
                                                                const SegmenterConfig& seg,
                                                                const PipelineConfig& pipe,
                                                                ChatClient& client) {
  std::vector<TrainingItem> items;
  for (const auto& unit : split_sentences(doc, seg)) {
    auto outcome = generate_for_sentence(unit, gen, client);
    for (auto& p : outcome.pairs) items.emplace_back(p);
  }
  std::map<int, std::vector<std::string>> out;
  for (int e = 1; e <= pipe.epochs; ++e) {
    for (const auto& b : assemble_batches(items, pipe.batch_size, e)) {
      for (const auto& it : b.items) out[e].push_back(item_key(it));
    }
    std::sort(out[e].begin(), out[e].end());
  }
  return out;
}

inline std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace lift::test
