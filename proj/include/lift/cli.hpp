// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lift/engine_config.hpp"
#include "lift/pipeline.hpp"

namespace lift {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAbort = 2;
inline constexpr int kExitUsage = 64;

struct Answer {
  std::string question;
  std::string prompt;  // exactly what the LIFTed model was sent
  std::string text;
};

struct RunOutcome {
  RunReport report;
  std::vector<Answer> answers;
  double ttft = 0.0;  // seconds, input submission to first answer
};

// run_lift followed by one context-free generate per question.
RunOutcome execute_run(const EngineConfig& cfg, const Document& doc,
                       const std::vector<std::string>& questions, Trainer& trainer,
                       ChatClient* generator);

nlohmann::json run_outcome_json(const EngineConfig& cfg, const RunOutcome& outcome);

// Entry point of the `lift` tool. Never throws; returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lift
