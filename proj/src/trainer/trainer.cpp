// SPDX-License-Identifier: Apache-2.0
#include "lift/trainer.hpp"

#include "lift/codec.hpp"
#include "lift/errors.hpp"

namespace lift {

void to_json(nlohmann::json& j, const Decoding& d) {
  if (d.mode == DecodingMode::greedy) {
    j = json{{"mode", "greedy"}};
  } else {
    j = json{{"mode", "sampled"}, {"temperature", d.temperature}, {"seed", d.seed}};
  }
}

void from_json(const nlohmann::json& j, Decoding& d) {
  const auto mode = required<std::string>(j, "mode");
  if (mode == "greedy") {
    d = Decoding::greedy();
  } else if (mode == "sampled") {
    d = Decoding::sampled(required<double>(j, "temperature"), required<std::uint64_t>(j, "seed"));
    if (!(d.temperature > 0.0)) throw ValidationError("decoding.temperature", "must be > 0");
  } else {
    throw ValidationError("decoding.mode", "unknown value '" + mode + "'");
  }
}

std::string question_prompt(std::string_view question) {
  return "Question: " + std::string(question) + "\nAnswer:";
}

void TrainerEndpoint::validate() const {
  if (in_process == !base_url.empty()) {
    throw ValidationError("trainer.endpoint", "exactly one of base_url / in_process must be set");
  }
  if (!in_process && !base_url.starts_with("http://") && !base_url.starts_with("https://")) {
    throw ValidationError("trainer.base_url", "must be an http(s) URL");
  }
  if (timeout.count() <= 0) throw ValidationError("trainer.timeout", "must be > 0");
}

}  // namespace lift
