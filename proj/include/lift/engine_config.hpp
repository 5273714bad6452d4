// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lift/benchkit.hpp"
#include "lift/evalharness.hpp"
#include "lift/pipeline.hpp"
#include "lift/segmenter.hpp"
#include "lift/taskgen.hpp"
#include "lift/trainer.hpp"

namespace lift {

struct TrainerSection {
  TrainerEndpoint endpoint = TrainerEndpoint::local();  // "mock" or an http(s) URL
  std::string base_model = "mock-base";
  std::string job_id = "lift";
  double learning_rate = 1e-4;
  AdapterConfig adapter;
  int max_answer_tokens = 64;
};

struct NiahSection {
  std::string filler_path;
  std::vector<int> lengths{1000};
  std::vector<double> depths{0, 25, 50, 75, 100};
  int max_concurrent_cells = 2;
  bool skip_training = false;
};

struct BenchSection {
  CostParams cost;
  int n_sentences = 64;
  double context_len = 8000;
  std::optional<double> ttft_lift;  // seconds; simulated when absent
  std::vector<std::int64_t> output_lengths{0, 256, 512, 1024, 2048, 4096};
  std::string doc_path;
  std::string question = "What is this document about?";
};

// Single source of truth for a run. Relative paths are resolved against the
// config file's directory; only API keys come from the environment.
struct EngineConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "lift-out";
  GenerationConfig generator;
  SegmenterConfig segmenter;
  PipelineConfig pipeline;
  TrainerSection trainer;
  JudgeConfig judge;
  NiahSection niah;
  BenchSection bench;

  void validate() const;
  // Job spec with the pipeline's batch size and epochs.
  TrainerJob job(const std::string& doc_id) const;
  LiftEngineOptions engine_options(bool skip_training) const;

  // Throws ValidationError naming the offending field.
  static EngineConfig load(const std::filesystem::path& path);
  static EngineConfig parse(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

void to_json(nlohmann::json& j, const EngineConfig& v);

}  // namespace lift
