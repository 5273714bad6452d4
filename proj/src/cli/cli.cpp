// SPDX-License-Identifier: Apache-2.0
#include "lift/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "lift/codec.hpp"
#include "lift/errors.hpp"
#include "lift/mock_trainer.hpp"
#include "lift/trainer_http.hpp"

namespace lift {
namespace fs = std::filesystem;

namespace {

// Config and flag problems that CLI11 cannot see (exit 64).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string doc;
  std::vector<std::string> questions;
  std::vector<int> lengths;
  std::vector<double> depths;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out_dir;
  // mock-worker
  std::vector<std::string> vocab_docs;
  std::string model;
  std::string host = "127.0.0.1";
  int port = 0;
  int train_latency_ms = 0;
};

std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::Validation, "cannot write " + path.string());
}

EngineConfig load_config(const Flags& f) {
  EngineConfig cfg;
  try {
    cfg = EngineConfig::load(f.config);
  } catch (const ValidationError& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  if (f.seed) {
    cfg.seed = *f.seed;
    cfg.pipeline.seed = *f.seed;
  }
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  return cfg;
}

Document load_document(const EngineConfig& cfg, const std::string& path, Trainer* tokenizer) {
  auto text = read_file(path, "document");
  ExternalTokenizer external;
  if (tokenizer) external = [tokenizer](std::string_view t) { return tokenizer->tokenize(t); };
  auto kind = cfg.segmenter.token_estimator;
  if (kind == TokenEstimatorKind::external && !external) kind = TokenEstimatorKind::chars_div_4;
  try {
    return make_document(fs::path(path).stem().string(), std::move(text), cfg.generator.prompt_kind,
                         TokenEstimator(kind, external));
  } catch (const ValidationError& e) {
    throw UsageError(std::string("invalid document: ") + e.what());
  }
}

std::unique_ptr<Trainer> make_trainer(const EngineConfig& cfg, const std::string& vocab_text) {
  if (cfg.trainer.endpoint.in_process) {
    auto mock = std::make_unique<MockTrainer>();
    mock->register_model(cfg.trainer.base_model, MockTrainer::vocabulary_from_text(vocab_text));
    return mock;
  }
  return std::make_unique<HttpTrainerClient>(cfg.trainer.endpoint);
}

std::unique_ptr<ChatClient> make_generator(const EngineConfig& cfg) {
  if (cfg.pipeline.mode == TrainingMode::finetune_raw) return nullptr;
  return make_chat_client(cfg.generator.endpoint_url, "LIFT_GENERATOR_API_KEY");
}

json error_record(std::string_view kind, std::string_view message) {
  return json{{"error", {{"kind", kind}, {"message", message}}}};
}

void report_skipped(const std::vector<SkippedSentence>& skipped, std::ostream& err) {
  for (const auto& s : skipped) {
    err << "skipped sentence " << s.sentence_index << " after " << s.attempts
        << " attempt(s): " << s.error << '\n';
  }
}

int cmd_run(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(f);
  const auto text = read_file(f.doc, "document");
  auto trainer = make_trainer(cfg, text);
  const auto doc = load_document(cfg, f.doc, trainer.get());
  auto generator = make_generator(cfg);
  const auto outcome = execute_run(cfg, doc, f.questions, *trainer, generator.get());
  report_skipped(outcome.report.skipped, err);
  const fs::path path = fs::path(cfg.output_dir) / "run_report.json";
  write_file(path, run_outcome_json(cfg, outcome).dump(2) + "\n");
  for (const auto& a : outcome.answers) out << "Q: " << a.question << "\nA: " << a.text << '\n';
  if (!outcome.answers.empty()) out << "ttft_s " << outcome.ttft << '\n';
  out << "report " << path.string() << '\n';
  return kExitOk;
}

int cmd_gen(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(f);
  if (cfg.pipeline.cache_dir.empty()) throw UsageError("gen needs pipeline.cache_dir");
  const auto doc = load_document(cfg, f.doc, nullptr);
  auto generator = make_chat_client(cfg.generator.endpoint_url, "LIFT_GENERATOR_API_KEY");
  const auto report = generate_tasks(doc, cfg.generator, cfg.segmenter, cfg.pipeline, *generator);
  report_skipped(report.skipped, err);
  const fs::path path = fs::path(cfg.output_dir) / "gen_report.json";
  write_file(path, json{{"config", cfg}, {"report", report}}.dump(2) + "\n");
  out << "sentences " << report.n_sentences << ", generator calls " << report.generator_calls
      << ", qa pairs " << report.qa_pairs << ", cache " << report.cache_file << '\n';
  return kExitOk;
}

int cmd_eval_niah(const Flags& f, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(f);
  if (!f.lengths.empty()) cfg.niah.lengths = f.lengths;
  if (!f.depths.empty()) cfg.niah.depths = f.depths;
  const auto filler_path = f.doc.empty() ? cfg.niah.filler_path : f.doc;
  if (filler_path.empty()) throw UsageError("eval-niah needs --doc or niah.filler_path");
  const auto filler = read_file(filler_path, "filler corpus");

  const auto engine = make_lift_engine(cfg.engine_options(cfg.niah.skip_training));
  const auto report = run_niah_matrix(cfg.niah.lengths, cfg.niah.depths, filler, engine, cfg.seed,
                                      cfg.niah.max_concurrent_cells);
  const fs::path dir = cfg.output_dir;
  write_file(dir / "niah_report.json", json{{"config", cfg}, {"report", report}}.dump(2) + "\n");
  write_file(dir / "niah_heatmap.txt", report.heatmap());
  write_file(dir / "niah.csv", report.csv());
  out << report.heatmap();

  bool any_ok = false;
  const NiahCell* first_failed = nullptr;
  for (const auto& c : report.cells) {
    any_ok |= !c.failed;
    if (c.failed) {
      err << "cell L=" << c.length_l << " D=" << c.depth_d << " failed: " << c.error << '\n';
      if (!first_failed) first_failed = &c;
    }
  }
  if (any_ok) return kExitOk;
  const auto colon = first_failed->error.find(':');
  err << error_record(first_failed->error.substr(0, colon), first_failed->error).dump() << '\n';
  return kExitAbort;
}

int cmd_bench(const Flags& f, std::ostream& out, std::ostream&) {
  auto cfg = load_config(f);
  const fs::path dir = cfg.output_dir;
  const int m = cfg.generator.qas_per_sentence;

  if (f.mode == "simulate") {
    std::ostringstream csv;
    csv << "schedule,generation_span_s,epoch1_done_s,training_done_s,ttft_s,batches_per_epoch\n";
    json timelines = json::object();
    for (const bool pipelined : {true, false}) {
      const auto tl = simulate_schedule(cfg.bench.n_sentences, cfg.bench.cost, pipelined,
                                        cfg.pipeline.epochs, cfg.pipeline.batch_size, m);
      const char* name = pipelined ? "pipelined" : "serial";
      csv << name << ',' << tl.generation_span / 1e6 << ',' << tl.epoch1_done / 1e6 << ','
          << tl.training_done / 1e6 << ',' << tl.first_answer_token / 1e6 << ','
          << tl.batches_per_epoch << '\n';
      timelines[name] = {{"generation_span_us", tl.generation_span},
                         {"epoch1_done_us", tl.epoch1_done},
                         {"training_done_us", tl.training_done},
                         {"first_answer_token_us", tl.first_answer_token},
                         {"metrics", tl.metrics()}};
    }
    write_file(dir / "bench_simulate.csv", csv.str());
    write_file(dir / "bench_simulate.json", json{{"config", cfg}, {"timelines", timelines}}.dump(2) + "\n");
    out << csv.str();
    return kExitOk;
  }

  if (f.mode == "crossover") {
    double ttft = 0.0;
    if (cfg.bench.ttft_lift) {
      ttft = *cfg.bench.ttft_lift;
    } else {
      const auto tl = simulate_schedule(cfg.bench.n_sentences, cfg.bench.cost, true,
                                        cfg.pipeline.epochs, cfg.pipeline.batch_size, m);
      ttft = static_cast<double>(tl.first_answer_token) / 1e6;
    }
    const auto table =
        crossover_analysis(cfg.bench.cost, cfg.bench.context_len, ttft, cfg.bench.output_lengths);
    write_file(dir / "bench_crossover.csv", table.csv());
    write_file(dir / "bench_crossover.json", json{{"config", cfg}, {"table", table}}.dump(2) + "\n");
    out << table.csv() << table.summary();
    return kExitOk;
  }

  // ttft: the same document through both schedules on a fresh stack each.
  const auto doc_path = f.doc.empty() ? cfg.bench.doc_path : f.doc;
  if (doc_path.empty()) throw UsageError("bench --mode ttft needs --doc or bench.doc_path");
  const auto question = f.questions.empty() ? cfg.bench.question : f.questions.front();
  const auto text = read_file(doc_path, "document");
  std::ostringstream csv;
  csv << "schedule,ttft_s,training_done_s,generator_calls\n";
  json runs = json::object();
  for (const auto order : {BatchOrder::arrival_then_canonical, BatchOrder::always_canonical}) {
    auto run_cfg = cfg;
    run_cfg.pipeline.batch_order = order;
    run_cfg.pipeline.cache_dir.clear();  // generation must really happen
    auto trainer = make_trainer(run_cfg, text);
    const auto doc = load_document(run_cfg, doc_path, trainer.get());
    auto generator = make_generator(run_cfg);
    RunOutcome outcome;
    const double ttft = measure_ttft([&] {
      outcome = execute_run(run_cfg, doc, {question}, *trainer, generator.get());
      return outcome.report.metrics;
    });
    const char* name = order == BatchOrder::arrival_then_canonical ? "pipelined" : "serial";
    csv << name << ',' << ttft << ','
        << outcome.report.metrics.first(EventKind::training_done).value_or(0.0) << ','
        << outcome.report.generator_calls << '\n';
    runs[name] = run_outcome_json(run_cfg, outcome);
  }
  write_file(dir / "bench_ttft.csv", csv.str());
  write_file(dir / "bench_ttft.json", json{{"config", cfg}, {"runs", runs}}.dump(2) + "\n");
  out << csv.str();
  return kExitOk;
}

int cmd_mock_worker(const Flags& f, std::ostream& out, std::ostream&) {
  std::string model = f.model;
  if (!f.config.empty() && model.empty()) model = load_config(f).trainer.base_model;
  if (model.empty()) model = "mock-base";
  std::string vocab_text;
  for (const auto& p : f.vocab_docs) vocab_text += read_file(p, "vocabulary document") + "\n";
  MockTrainer mock(MockTrainerOptions{std::chrono::milliseconds(f.train_latency_ms)});
  mock.register_model(model, MockTrainer::vocabulary_from_text(vocab_text));
  TrainerHttpServer server(mock, env_or_empty("LIFT_TRAINER_API_KEY"));
  server.start(f.host, f.port);
  out << "listening " << server.url() << std::endl;
  for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

}  // namespace

RunOutcome execute_run(const EngineConfig& cfg, const Document& doc,
                       const std::vector<std::string>& questions, Trainer& trainer,
                       ChatClient* generator) {
  MetricsLog metrics;
  const LiftRequest request{doc, cfg.generator, cfg.segmenter, cfg.pipeline, cfg.job(doc.doc_id)};
  RunOutcome outcome;
  outcome.report = run_lift(request, trainer, generator, &metrics);
  for (const auto& q : questions) {
    Answer a{q, question_prompt(q), {}};
    a.text = trainer.generate(outcome.report.adapter_ref, a.prompt, cfg.trainer.max_answer_tokens,
                              Decoding::greedy());
    // generate() is not streamed, so the first token lands with the answer.
    if (outcome.answers.empty()) metrics.record(EventKind::first_answer_token);
    metrics.record(EventKind::answer_done);
    outcome.answers.push_back(std::move(a));
  }
  outcome.report.metrics = metrics.snapshot();
  outcome.ttft = outcome.report.metrics.ttft().value_or(0.0);
  return outcome;
}

json run_outcome_json(const EngineConfig& cfg, const RunOutcome& outcome) {
  json answers = json::array();
  for (const auto& a : outcome.answers) {
    answers.push_back({{"question", a.question}, {"prompt", a.prompt}, {"answer", a.text}});
  }
  json j{{"config", cfg}, {"report", outcome.report}, {"answers", std::move(answers)}};
  j["ttft_s"] = outcome.answers.empty() ? json(nullptr) : json(outcome.ttft);
  return j;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-input fine-tuning engine", "lift"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&f](CLI::App* sub, bool doc_required) {
    sub->add_option("--config", f.config, "Engine config (JSON)")->required()->check(CLI::ExistingFile);
    auto* doc = sub->add_option("--doc", f.doc, "Input document");
    if (doc_required) doc->required();
    sub->add_option("--seed", f.seed, "Run seed (overrides config)");
    sub->add_option("--out-dir", f.out_dir, "Output directory (overrides config)");
  };

  auto* run = app.add_subcommand("run", "Fine-tune on a document, then answer questions without it");
  add_common(run, true);
  run->add_option("--question", f.questions, "Question for the LIFTed model (repeatable)");

  auto* gen = app.add_subcommand("gen", "Generate and cache synthetic QA tasks only");
  add_common(gen, true);

  auto* niah = app.add_subcommand("eval-niah", "Needle-in-a-haystack matrix");
  add_common(niah, false);
  niah->add_option("--lengths", f.lengths, "Comma-separated lengths in tokens")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  niah->add_option("--depths", f.depths, "Comma-separated depths in percent")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 100.0));

  auto* bench = app.add_subcommand("bench", "TTFT, schedule simulation and crossover analysis");
  add_common(bench, false);
  bench->add_option("--mode", f.mode, "ttft | crossover | simulate")
      ->required()
      ->check(CLI::IsMember({"ttft", "crossover", "simulate"}));
  bench->add_option("--question", f.questions, "Question used for the TTFT probe");

  auto* worker = app.add_subcommand("mock-worker", "Serve the mock trainer over HTTP");
  worker->add_option("--config", f.config, "Engine config (for trainer.base_model)")->check(CLI::ExistingFile);
  worker->add_option("--doc", f.vocab_docs, "Documents whose words form the vocabulary (repeatable)");
  worker->add_option("--model", f.model, "Base model name");
  worker->add_option("--host", f.host, "Bind address");
  worker->add_option("--port", f.port, "Port (0 picks one)")->check(CLI::Range(0, 65535));
  worker->add_option("--train-latency-ms", f.train_latency_ms, "Artificial delay per batch")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(f, out, err);
    if (gen->parsed()) return cmd_gen(f, out, err);
    if (niah->parsed()) return cmd_eval_niah(f, out, err);
    if (bench->parsed()) return cmd_bench(f, out, err);
    return cmd_mock_worker(f, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    const auto record = error_record(to_string(e.kind()), e.what());
    err << record.dump() << '\n';
    if (!f.out_dir.empty() || !f.config.empty()) {
      try {
        const auto dir = f.out_dir.empty() ? EngineConfig::load(f.config).output_dir : f.out_dir;
        write_file(fs::path(dir) / "error.json", record.dump(2) + "\n");
      } catch (const std::exception&) {
        // The record on stderr is what matters.
      }
    }
    return kExitAbort;
  } catch (const std::exception& e) {
    err << error_record("InternalError", e.what()).dump() << '\n';
    return kExitAbort;
  }
}

}  // namespace lift
