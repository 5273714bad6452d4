// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "lift/assets.hpp"
#include "lift/codec.hpp"
#include "lift/digest.hpp"
#include "lift/errors.hpp"
#include "lift/segmenter.hpp"
#include "lift/taskgen.hpp"

namespace lift {
namespace {

std::string_view asset(const std::string& name) {
  auto text = assets::find(name);
  if (!text) throw Error(ErrorKind::UnknownPromptKind, "missing prompt asset " + name);
  return *text;
}

std::string versioned(std::string_view file) {
  return "prompts/" + std::string(kPromptTemplateVersion) + "/" + std::string(file);
}

}  // namespace

std::string_view system_template(PromptKind kind) {
  switch (kind) {
    case PromptKind::squad:
      return asset(versioned("squad_system.txt"));
    case PromptKind::niah:
      return asset(versioned("niah_system.txt"));
    case PromptKind::generic:
      return asset(versioned("generic_system.txt"));
  }
  throw Error(ErrorKind::UnknownPromptKind, "unknown prompt kind");
}

std::string_view user_template() { return asset(versioned("user.txt")); }

std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string_view, std::string>>& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        bool bound = false;
        for (const auto& [key, value] : bindings) {
          if (key == name) {
            out += value;
            bound = true;
            break;
          }
        }
        if (bound) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::vector<ChatMessage> RenderedPrompt::messages() const {
  return {{"system", system}, {"user", user}};
}

std::string RenderedPrompt::digest() const {
  json messages_json = json::array();
  for (const auto& m : messages()) {
    messages_json.push_back({{"role", m.role}, {"content", m.content}});
  }
  return sha256_hex(messages_json.dump());
}

RenderedPrompt render_prompt(const SentenceUnit& unit, const GenerationConfig& cfg) {
  unit.validate();
  if (cfg.qas_per_sentence < 1) throw ValidationError("qas_per_sentence", "must be >= 1");
  const std::string paragraph(trim(unit.preceding_context + unit.sentence_text));
  const std::string target(trim(unit.sentence_text));
  const auto num_questions = std::to_string(cfg.qas_per_sentence);

  RenderedPrompt prompt;
  prompt.system = substitute(system_template(cfg.prompt_kind), {{"num_questions", num_questions}});
  prompt.user = substitute(user_template(), {{"paragraph", paragraph},
                                             {"target_sentence", target},
                                             {"num_questions", num_questions}});
  return prompt;
}

}  // namespace lift
