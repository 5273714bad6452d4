// SPDX-License-Identifier: Apache-2.0
#include "lift/scripted_generator.hpp"

#include <charconv>
#include <sstream>
#include <thread>

#include "lift/codec.hpp"
#include "lift/errors.hpp"
#include "lift/segmenter.hpp"

namespace lift {
namespace {

constexpr std::string_view kTargetMarker = "\n\nThe last part of the paragraph:\n";
constexpr std::string_view kGenerateMarker = "\n\nGenerate ";
constexpr std::string_view kParagraphMarker = "The paragraph:\n";

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out.push_back(' ');
    } else if (s[i] == '%' && i + 2 < s.size()) {
      int value = 0;
      std::from_chars(s.data() + i + 1, s.data() + i + 3, value, 16);
      out.push_back(static_cast<char>(value));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace

ScriptedChatClient::ScriptedChatClient(ScriptedOptions options) : options_(std::move(options)) {}

ScriptedOptions ScriptedChatClient::parse_url(std::string_view url) {
  ScriptedOptions options;
  const auto q = url.find('?');
  if (q == std::string_view::npos) return options;
  auto query = url.substr(q + 1);
  while (!query.empty()) {
    const auto amp = query.find('&');
    const auto pair = query.substr(0, amp);
    const auto eq = pair.find('=');
    const auto key = pair.substr(0, eq);
    const auto value = eq == std::string_view::npos ? std::string_view{} : pair.substr(eq + 1);
    if (key == "latency_ms") {
      double ms = 0;
      std::istringstream(std::string(value)) >> ms;
      options.latency = std::chrono::microseconds(static_cast<long long>(ms * 1000));
    } else if (key == "focus") {
      options.focus = percent_decode(value);
    } else {
      throw ValidationError("endpoint_url", "unknown scripted option '" + std::string(key) + "'");
    }
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
  }
  return options;
}

ParsedUserMessage parse_user_message(std::string_view user) {
  const auto target_at = user.rfind(kTargetMarker);
  const auto generate_at = user.rfind(kGenerateMarker);
  if (!user.starts_with(kParagraphMarker) || target_at == std::string_view::npos ||
      generate_at == std::string_view::npos || generate_at < target_at) {
    throw Error(ErrorKind::MalformedResponse, "user message does not follow the prompt template");
  }
  ParsedUserMessage out;
  out.paragraph = std::string(user.substr(kParagraphMarker.size(), target_at - kParagraphMarker.size()));
  const auto target_begin = target_at + kTargetMarker.size();
  out.target_sentence = std::string(user.substr(target_begin, generate_at - target_begin));
  const auto digits = user.substr(generate_at + kGenerateMarker.size());
  std::from_chars(digits.data(), digits.data() + digits.size(), out.num_questions);
  return out;
}

std::string scripted_qa_response(std::string_view target_sentence, int m) {
  std::string lead;
  int words = 0;
  std::istringstream in{std::string(target_sentence)};
  for (std::string w; words < 6 && in >> w; ++words) {
    if (!lead.empty()) lead.push_back(' ');
    lead += w;
  }
  json list = json::array();
  for (int i = 0; i < m; ++i) {
    list.push_back({{"question", "Q" + std::to_string(i + 1) + ": what does the passage say about \"" +
                                     lead + "\"?"},
                    {"answer", std::string(trim(target_sentence))}});
  }
  return json{{"qa_list", std::move(list)}}.dump();
}

std::string ScriptedChatClient::complete(const ChatRequest& request) {
  ++calls_;
  if (options_.latency.count() > 0) std::this_thread::sleep_for(options_.latency);
  std::string_view user;
  for (const auto& m : request.messages) {
    if (m.role == "user") user = m.content;
  }
  const auto parsed = parse_user_message(user);
  if (!options_.focus.empty() && parsed.target_sentence.find(options_.focus) == std::string::npos) {
    return R"({"qa_list": []})";
  }
  return scripted_qa_response(parsed.target_sentence, parsed.num_questions);
}

}  // namespace lift
