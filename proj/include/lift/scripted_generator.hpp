// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <string>
#include <string_view>

#include "lift/chat_client.hpp"

namespace lift {

struct ScriptedOptions {
  std::chrono::microseconds latency{0};
  // When non-empty, sentences not containing this text get an empty qa_list.
  std::string focus;
};

// Deterministic stand-in for a generator endpoint. It reads the target
// sentence out of the rendered user message and answers with m QA pairs whose
// answer is that sentence. Thread-safe.
//
// URL form: scripted://echo[?latency_ms=N][&focus=TEXT]
class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(ScriptedOptions options = {});

  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

  static ScriptedOptions parse_url(std::string_view url);

 private:
  ScriptedOptions options_;
  std::atomic<std::size_t> calls_{0};
};

// The fields a scripted generator recovers from a rendered user message.
struct ParsedUserMessage {
  std::string paragraph;
  std::string target_sentence;
  int num_questions = 0;
};

ParsedUserMessage parse_user_message(std::string_view user);

std::string scripted_qa_response(std::string_view target_sentence, int m);

}  // namespace lift
