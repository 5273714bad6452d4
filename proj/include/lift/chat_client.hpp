// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace lift {

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 1024;
};

// One chat-completions round trip. Implementations throw
// Error{ErrorKind::Transport} for connection failures and non-2xx statuses,
// and Error{ErrorKind::MalformedResponse} when the envelope cannot be read.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

// OpenAI-compatible wire format.
std::string chat_request_body(const ChatRequest& request);
std::string chat_response_content(std::string_view body);

class HttpChatClient final : public ChatClient {
 public:
  // `endpoint_url` is the server root; requests go to
  // {endpoint_url}/v1/chat/completions.
  HttpChatClient(std::string endpoint_url, std::string api_key,
                 std::chrono::milliseconds timeout = std::chrono::seconds(120));

  std::string complete(const ChatRequest& request) override;

 private:
  std::string endpoint_url_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

// http(s):// endpoints get an HttpChatClient with the bearer token read from
// `api_key_env`; scripted:// endpoints get a ScriptedChatClient.
std::unique_ptr<ChatClient> make_chat_client(const std::string& endpoint_url,
                                             const std::string& api_key_env);

std::string env_or_empty(const std::string& name);

}  // namespace lift
