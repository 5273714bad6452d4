// SPDX-License-Identifier: Apache-2.0
#include "lift/chat_client.hpp"

#include <cstdlib>

#include "http_util.hpp"
#include "lift/codec.hpp"
#include "lift/errors.hpp"
#include "lift/scripted_generator.hpp"

namespace lift {

std::string chat_request_body(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return json{{"model", request.model},
              {"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}}
      .dump();
}

std::string chat_response_content(std::string_view body) {
  const auto parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("choices") ||
      !parsed.at("choices").is_array() || parsed.at("choices").empty()) {
    throw Error(ErrorKind::MalformedResponse, "response has no choices");
  }
  const auto& choice = parsed.at("choices").at(0);
  if (!choice.is_object() || !choice.contains("message") || !choice.at("message").is_object() ||
      !choice.at("message").contains("content") ||
      !choice.at("message").at("content").is_string()) {
    throw Error(ErrorKind::MalformedResponse, "choices[0].message.content missing");
  }
  return choice.at("message").at("content").get<std::string>();
}

HttpChatClient::HttpChatClient(std::string endpoint_url, std::string api_key,
                               std::chrono::milliseconds timeout)
    : endpoint_url_(std::move(endpoint_url)), api_key_(std::move(api_key)), timeout_(timeout) {}

std::string HttpChatClient::complete(const ChatRequest& request) {
  const auto url = detail::split_url(endpoint_url_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(url.prefix + "/v1/chat/completions", headers,
                         chat_request_body(request), "application/json");
  if (!res) {
    throw Error(ErrorKind::Transport,
                "POST " + endpoint_url_ + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorKind::Transport, "POST " + endpoint_url_ + " returned HTTP " +
                                          std::to_string(res->status));
  }
  return chat_response_content(res->body);
}

std::string env_or_empty(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  return value ? std::string(value) : std::string();
}

std::unique_ptr<ChatClient> make_chat_client(const std::string& endpoint_url,
                                             const std::string& api_key_env) {
  if (endpoint_url.starts_with("scripted://")) {
    return std::make_unique<ScriptedChatClient>(ScriptedChatClient::parse_url(endpoint_url));
  }
  if (endpoint_url.starts_with("http://") || endpoint_url.starts_with("https://")) {
    return std::make_unique<HttpChatClient>(endpoint_url, env_or_empty(api_key_env));
  }
  throw ValidationError("endpoint_url", "unsupported endpoint '" + endpoint_url + "'");
}

}  // namespace lift
