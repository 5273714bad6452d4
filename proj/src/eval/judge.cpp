// SPDX-License-Identifier: Apache-2.0
#include "lift/assets.hpp"
#include "lift/codec.hpp"
#include "lift/config.hpp"
#include "lift/errors.hpp"
#include "lift/evalharness.hpp"

namespace lift {

void JudgeConfig::validate() const {
  if (retries < 0) throw ValidationError("judge.retries", "must be >= 0");
}

void to_json(json& j, const JudgeConfig& v) {
  j = json{{"endpoint_url", v.endpoint_url}, {"model_name", v.model_name}, {"retries", v.retries}};
}

void from_json(const json& j, JudgeConfig& v) {
  reject_unknown_keys(j, {"endpoint_url", "model_name", "retries"}, "judge");
  const JudgeConfig d;
  v.endpoint_url = optional_or(j, "endpoint_url", d.endpoint_url);
  v.model_name = optional_or(j, "model_name", d.model_name);
  v.retries = optional_or(j, "retries", d.retries);
  v.validate();
}

std::string render_judge_prompt(std::string_view question, std::string_view ground_truth,
                                std::string_view response) {
  const auto tmpl = assets::find("prompts/v1/judge.txt");
  if (!tmpl) throw Error(ErrorKind::Validation, "judge prompt asset missing");
  return substitute(*tmpl, {{"question", std::string(question)},
                            {"ground_truth", std::string(ground_truth)},
                            {"response", std::string(response)}});
}

std::optional<bool> parse_judge_verdict(std::string_view reply) {
  const auto t = trim(reply);
  if (t == "True") return true;
  if (t == "False") return false;
  return std::nullopt;
}

bool judge_answer(std::string_view question, std::string_view ground_truth,
                  std::string_view response, const JudgeConfig& cfg, ChatClient& client) {
  cfg.validate();
  const ChatRequest request{cfg.model_name,
                            {{"user", render_judge_prompt(question, ground_truth, response)}},
                            0.0,
                            16};
  std::string last;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    try {
      last = client.complete(request);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Transport && e.kind() != ErrorKind::MalformedResponse) throw;
      if (attempt == cfg.retries) throw;
      continue;
    }
    if (auto verdict = parse_judge_verdict(last)) return *verdict;
  }
  throw Error(ErrorKind::JudgeUnparseable, "judge reply not True/False: '" + last + "'");
}

}  // namespace lift
