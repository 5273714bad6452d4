// SPDX-License-Identifier: Apache-2.0
#include "lift/taskgen.hpp"

#include "lift/codec.hpp"
#include "lift/errors.hpp"
#include "lift/segmenter.hpp"

namespace lift {
namespace {

std::string_view strip_fences(std::string_view s) {
  s = trim(s);
  if (s.starts_with("```")) {
    const auto newline = s.find('\n');
    s = newline == std::string_view::npos ? std::string_view{} : s.substr(newline + 1);
  }
  s = trim(s);
  if (s.ends_with("```")) s.remove_suffix(3);
  return trim(s);
}

// Index one past the '}' matching the '{' at `open`, honouring JSON strings.
std::size_t matching_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

void GenerationConfig::validate() const {
  if (qas_per_sentence < 1) throw ValidationError("qas_per_sentence", "must be >= 1");
  if (max_retries < 0) throw ValidationError("max_retries", "must be >= 0");
  if (request_parallelism < 1) throw ValidationError("request_parallelism", "must be >= 1");
  if (sampling.temperature < 0.0) throw ValidationError("sampling.temperature", "must be >= 0");
  if (sampling.max_output_tokens < 1) throw ValidationError("sampling.max_output_tokens", "must be >= 1");
}

std::vector<QAText> parse_qa_response(std::string_view raw_text, int m) {
  const auto text = strip_fences(raw_text);
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    const auto close = matching_brace(text, open);
    if (close == std::string_view::npos) break;
    const auto parsed = json::parse(text.substr(open, close - open), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("qa_list") ||
        !parsed.at("qa_list").is_array()) {
      continue;
    }
    const auto& list = parsed.at("qa_list");
    if (list.empty()) throw Error(ErrorKind::EmptyList, "qa_list is empty");
    std::vector<QAText> pairs;
    for (const auto& item : list) {
      if (static_cast<int>(pairs.size()) >= m) break;
      if (!item.is_object() || !item.contains("question") || !item.contains("answer") ||
          !item.at("question").is_string() || !item.at("answer").is_string()) {
        continue;
      }
      const auto question = trim(item.at("question").get_ref<const std::string&>());
      const auto answer = trim(item.at("answer").get_ref<const std::string&>());
      if (question.empty() || answer.empty()) continue;
      pairs.emplace_back(std::string(question), std::string(answer));
    }
    if (pairs.empty()) throw Error(ErrorKind::MalformedResponse, "qa_list holds no usable pairs");
    return pairs;
  }
  throw Error(ErrorKind::MalformedResponse, "no well-formed qa_list object in response");
}

std::string_view to_string(OutcomeStatus status) {
  switch (status) {
    case OutcomeStatus::ok:
      return "ok";
    case OutcomeStatus::partial:
      return "partial";
    case OutcomeStatus::skipped:
      return "skipped";
  }
  return "skipped";
}

OutcomeStatus outcome_status_from_string(std::string_view s) {
  if (s == "ok") return OutcomeStatus::ok;
  if (s == "partial") return OutcomeStatus::partial;
  if (s == "skipped") return OutcomeStatus::skipped;
  throw ValidationError("outcome", "unknown status '" + std::string(s) + "'");
}

GenerationOutcome generate_for_sentence(const SentenceUnit& unit, const GenerationConfig& cfg,
                                        ChatClient& client) {
  cfg.validate();
  const auto prompt = render_prompt(unit, cfg);

  GenerationOutcome outcome;
  outcome.unit = unit;
  outcome.prompt_hash = prompt.digest();

  const ChatRequest request{cfg.model_name, prompt.messages(), cfg.sampling.temperature,
                            cfg.sampling.max_output_tokens};
  for (int attempt = 1; attempt <= cfg.max_retries + 1; ++attempt) {
    outcome.attempts = attempt;
    try {
      const auto pairs = parse_qa_response(client.complete(request), cfg.qas_per_sentence);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        outcome.pairs.push_back(QAPair{unit.doc_id, unit.sentence_index, static_cast<int>(i),
                                       pairs[i].first, pairs[i].second, cfg.model_name,
                                       outcome.prompt_hash});
      }
      outcome.status = static_cast<int>(outcome.pairs.size()) == cfg.qas_per_sentence
                           ? OutcomeStatus::ok
                           : OutcomeStatus::partial;
      outcome.last_error.clear();
      return outcome;
    } catch (const Error& e) {
      outcome.last_error = std::string(to_string(e.kind())) + ": " + e.what();
      // An explicitly empty list is a valid answer, not a transient fault.
      if (e.kind() == ErrorKind::EmptyList) break;
    } catch (const std::exception& e) {
      outcome.last_error = std::string("TransportError: ") + e.what();
    }
  }
  outcome.status = OutcomeStatus::skipped;
  return outcome;
}

std::uint64_t estimate_training_cost(const CostModel& c, bool split) {
  c.validate();
  const auto m = static_cast<std::uint64_t>(c.qa_count);
  const auto l = static_cast<std::uint64_t>(c.qa_token_len);
  std::uint64_t cost = m;
  bool overflow = false;
  if (!split) overflow |= __builtin_mul_overflow(cost, m, &cost);
  overflow |= __builtin_mul_overflow(cost, l, &cost);
  overflow |= __builtin_mul_overflow(cost, l, &cost);
  if (overflow) throw ValidationError("cost_model", "cost overflows 64 bits");
  return cost;
}

}  // namespace lift
