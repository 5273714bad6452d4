// SPDX-License-Identifier: Apache-2.0
#include "lift/engine_config.hpp"

#include <fstream>

#include "lift/codec.hpp"
#include "lift/config.hpp"
#include "lift/errors.hpp"

namespace lift {
namespace fs = std::filesystem;

namespace {

bool is_http_url(std::string_view url) {
  return (url.starts_with("http://") && url.size() > 7) ||
         (url.starts_with("https://") && url.size() > 8);
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}


TrainerSection parse_trainer(const json& j) {
  reject_unknown_keys(j,
                      {"endpoint", "timeout_ms", "auth_env", "base_model", "job_id",
                       "learning_rate", "rank", "alpha", "max_answer_tokens"},
                      "trainer");
  TrainerSection t;
  const auto endpoint = optional_or<std::string>(j, "endpoint", "mock");
  t.endpoint = endpoint == "mock" ? TrainerEndpoint::local() : TrainerEndpoint::remote(endpoint);
  t.endpoint.timeout =
      std::chrono::milliseconds(optional_or<std::int64_t>(j, "timeout_ms", t.endpoint.timeout.count()));
  t.endpoint.auth_env = optional_or(j, "auth_env", t.endpoint.auth_env);
  t.base_model = optional_or(j, "base_model", t.base_model);
  t.job_id = optional_or(j, "job_id", t.job_id);
  t.learning_rate = optional_or(j, "learning_rate", t.learning_rate);
  t.adapter.rank = optional_or(j, "rank", t.adapter.rank);
  t.adapter.alpha = optional_or(j, "alpha", t.adapter.alpha);
  t.max_answer_tokens = optional_or(j, "max_answer_tokens", t.max_answer_tokens);
  return t;
}

json trainer_json(const TrainerSection& t) {
  return json{{"endpoint", t.endpoint.in_process ? std::string("mock") : t.endpoint.base_url},
              {"timeout_ms", t.endpoint.timeout.count()},
              {"auth_env", t.endpoint.auth_env},
              {"base_model", t.base_model},
              {"job_id", t.job_id},
              {"learning_rate", t.learning_rate},
              {"rank", t.adapter.rank},
              {"alpha", t.adapter.alpha},
              {"max_answer_tokens", t.max_answer_tokens}};
}

NiahSection parse_niah(const json& j) {
  reject_unknown_keys(j, {"filler_path", "lengths", "depths", "max_concurrent_cells", "skip_training"},
                      "niah");
  NiahSection n;
  n.filler_path = optional_or(j, "filler_path", n.filler_path);
  n.lengths = optional_or(j, "lengths", n.lengths);
  n.depths = optional_or(j, "depths", n.depths);
  n.max_concurrent_cells = optional_or(j, "max_concurrent_cells", n.max_concurrent_cells);
  n.skip_training = optional_or(j, "skip_training", n.skip_training);
  return n;
}

BenchSection parse_bench(const json& j) {
  reject_unknown_keys(j,
                      {"cost", "n_sentences", "context_len", "ttft_lift", "output_lengths",
                       "doc_path", "question"},
                      "bench");
  BenchSection b;
  if (j.contains("cost")) b.cost = j.at("cost").get<CostParams>();
  b.n_sentences = optional_or(j, "n_sentences", b.n_sentences);
  b.context_len = optional_or(j, "context_len", b.context_len);
  if (j.contains("ttft_lift") && !j.at("ttft_lift").is_null()) b.ttft_lift = required<double>(j, "ttft_lift");
  b.output_lengths = optional_or(j, "output_lengths", b.output_lengths);
  b.doc_path = optional_or(j, "doc_path", b.doc_path);
  b.question = optional_or(j, "question", b.question);
  return b;
}

}  // namespace

void EngineConfig::validate() const {
  segmenter.validate();
  pipeline.validate();
  generator.validate();
  trainer.endpoint.validate();
  judge.validate();
  bench.cost.validate();
  if (pipeline.mode != TrainingMode::finetune_raw) {
    const auto& url = generator.endpoint_url;
    if (!is_http_url(url) && !url.starts_with("scripted://")) {
      throw ValidationError("generator.endpoint_url", "must be an http(s):// or scripted:// URL");
    }
  }
  if (!judge.endpoint_url.empty() && !is_http_url(judge.endpoint_url) &&
      !judge.endpoint_url.starts_with("scripted://")) {
    throw ValidationError("judge.endpoint_url", "must be an http(s):// URL");
  }
  if (trainer.base_model.empty()) throw ValidationError("trainer.base_model", "must be non-empty");
  if (trainer.job_id.empty()) throw ValidationError("trainer.job_id", "must be non-empty");
  if (!(trainer.learning_rate > 0.0)) throw ValidationError("trainer.learning_rate", "must be > 0");
  if (trainer.adapter.rank < 1) throw ValidationError("trainer.rank", "must be > 0");
  if (trainer.max_answer_tokens < 1) throw ValidationError("trainer.max_answer_tokens", "must be >= 1");
  if (niah.lengths.empty()) throw ValidationError("niah.lengths", "must be non-empty");
  for (int l : niah.lengths) {
    if (l < 1) throw ValidationError("niah.lengths", "must be >= 1");
  }
  if (niah.depths.empty()) throw ValidationError("niah.depths", "must be non-empty");
  for (double d : niah.depths) {
    if (!(d >= 0.0 && d <= 100.0)) throw ValidationError("niah.depths", "must be in [0, 100]");
  }
  if (niah.max_concurrent_cells < 1) throw ValidationError("niah.max_concurrent_cells", "must be >= 1");
  if (bench.n_sentences < 1) throw ValidationError("bench.n_sentences", "must be >= 1");
  if (bench.ttft_lift && !(*bench.ttft_lift >= 0.0)) throw ValidationError("bench.ttft_lift", "must be >= 0");
  job("config-check").validate();
}

TrainerJob EngineConfig::job(const std::string& doc_id) const {
  TrainerJob j;
  j.job_id = trainer.job_id + "-" + doc_id;
  j.base_model = trainer.base_model;
  j.adapter = trainer.adapter;
  j.learning_rate = trainer.learning_rate;
  j.epochs = pipeline.epochs;
  j.batch_size = pipeline.batch_size;
  j.seed = static_cast<std::int64_t>(seed >> 1);
  return j;
}

LiftEngineOptions EngineConfig::engine_options(bool skip_training) const {
  LiftEngineOptions o;
  o.generation = generator;
  o.segmenter = segmenter;
  o.pipeline = pipeline;
  o.job = job("niah");
  o.job.job_id = trainer.job_id;
  o.trainer = trainer.endpoint;
  o.skip_training = skip_training;
  o.max_answer_tokens = trainer.max_answer_tokens;
  return o;
}

EngineConfig EngineConfig::parse(const json& j, const fs::path& base_dir) {
  reject_unknown_keys(j,
                      {"seed", "output_dir", "generator", "segmenter", "pipeline", "trainer", "judge",
                       "niah", "bench"},
                      "");
  auto sub = [&j](const char* name) { return j.contains(name) ? j.at(name) : json::object(); };
  EngineConfig c;
  c.seed = optional_or<std::uint64_t>(j, "seed", 0);
  c.output_dir = resolve(base_dir, optional_or<std::string>(j, "output_dir", c.output_dir));
  c.generator = sub("generator").get<GenerationConfig>();
  c.segmenter = sub("segmenter").get<SegmenterConfig>();
  c.pipeline = sub("pipeline").get<PipelineConfig>();
  c.pipeline.cache_dir = resolve(base_dir, c.pipeline.cache_dir);
  if (!sub("pipeline").contains("seed")) c.pipeline.seed = c.seed;
  c.trainer = parse_trainer(sub("trainer"));
  c.judge = sub("judge").get<JudgeConfig>();
  c.niah = parse_niah(sub("niah"));
  c.niah.filler_path = resolve(base_dir, c.niah.filler_path);
  c.bench = parse_bench(sub("bench"));
  c.bench.doc_path = resolve(base_dir, c.bench.doc_path);
  c.validate();
  return c;
}

EngineConfig EngineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot read '" + path.string() + "'");
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("config", "'" + path.string() + "' is not valid JSON");
  return parse(j, path.parent_path());
}

void to_json(json& j, const EngineConfig& v) {
  j = json{{"seed", v.seed},
           {"output_dir", v.output_dir},
           {"generator", v.generator},
           {"segmenter", v.segmenter},
           {"pipeline", v.pipeline},
           {"trainer", trainer_json(v.trainer)},
           {"judge", v.judge},
           {"niah",
            {{"filler_path", v.niah.filler_path},
             {"lengths", v.niah.lengths},
             {"depths", v.niah.depths},
             {"max_concurrent_cells", v.niah.max_concurrent_cells},
             {"skip_training", v.niah.skip_training}}},
           {"bench",
            {{"cost", v.bench.cost},
             {"n_sentences", v.bench.n_sentences},
             {"context_len", v.bench.context_len},
             {"ttft_lift", v.bench.ttft_lift ? json(*v.bench.ttft_lift) : json(nullptr)},
             {"output_lengths", v.bench.output_lengths},
             {"doc_path", v.bench.doc_path},
             {"question", v.bench.question}}}};
}

}  // namespace lift
