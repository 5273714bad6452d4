// SPDX-License-Identifier: Apache-2.0
#include "lift/trainer_http.hpp"

#include <cctype>

#include "../taskgen/http_util.hpp"
#include "lift/chat_client.hpp"
#include "lift/codec.hpp"
#include "lift/errors.hpp"

namespace lift {
namespace {

constexpr const char* kJson = "application/json";

std::string error_body(const Error& e) {
  json err{{"kind", to_string(e.kind())}, {"message", e.what()}};
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) err["field"] = v->field();
  return json{{"error", std::move(err)}}.dump();
}

[[noreturn]] void rethrow_error_body(int status, const std::string& body) {
  const auto parsed = json::parse(body, nullptr, false);
  if (parsed.is_object() && parsed.contains("error") && parsed.at("error").is_object()) {
    const auto& err = parsed.at("error");
    const auto kind_name = err.value("kind", std::string());
    const auto message = err.value("message", std::string());
    ErrorKind kind;
    try {
      kind = error_kind_from_string(kind_name);
    } catch (const Error&) {
      throw Error(ErrorKind::TrainerUnavailable,
                  "HTTP " + std::to_string(status) + " with unknown error kind '" + kind_name + "'");
    }
    if (kind == ErrorKind::Validation) {
      auto field = err.value("field", std::string("request"));
      // The server message already carries the "field: " prefix.
      auto detail = message.starts_with(field + ": ") ? message.substr(field.size() + 2) : message;
      throw ValidationError(std::move(field), detail);
    }
    throw Error(kind, message);
  }
  throw Error(ErrorKind::TrainerUnavailable, "trainer returned HTTP " + std::to_string(status));
}

// Percent-encodes everything outside the unreserved set so job ids and
// adapter refs survive as a single path segment.
std::string encode_segment(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == ':') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

json parse_body(const httplib::Request& req) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw ValidationError("body", "not valid JSON");
  return body;
}

}  // namespace

int http_status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownJob:
    case ErrorKind::UnknownRef:
    case ErrorKind::UnknownModel:
      return 404;
    case ErrorKind::JobFinalized:
    case ErrorKind::DuplicateJobId:
    case ErrorKind::ConcurrentTrainRejected:
    case ErrorKind::NoBatchesTrained:
      return 409;
    case ErrorKind::Validation:
    case ErrorKind::EncodingError:
      return 422;
    default:
      return 500;
  }
}

// ---- client ----

HttpTrainerClient::HttpTrainerClient(TrainerEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
  if (endpoint_.in_process) throw ValidationError("trainer.endpoint", "HTTP client needs a base_url");
  api_key_ = env_or_empty(endpoint_.auth_env);
}

std::string HttpTrainerClient::post(const std::string& path, const std::string& body,
                                    int expected_status) {
  const auto url = detail::split_url(endpoint_.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(endpoint_.timeout);
  client.set_read_timeout(endpoint_.timeout);
  client.set_write_timeout(endpoint_.timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(url.prefix + path, headers, body, kJson);
  if (!res) {
    throw Error(ErrorKind::TrainerUnavailable,
                "POST " + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == expected_status) return res->body;
  if (res->status == 401) throw Error(ErrorKind::TrainerUnavailable, "trainer rejected credentials");
  rethrow_error_body(res->status, res->body);
}

std::string HttpTrainerClient::create_job(const TrainerJob& job) {
  job.validate();
  const auto body = json::parse(post("/v1/jobs", encode(job), 201));
  return required<std::string>(body, "job_id");
}

BatchLossReport HttpTrainerClient::train_batch(const std::string& handle, const TaskBatch& batch) {
  batch.validate();
  return decode<BatchLossReport>(
      post("/v1/jobs/" + encode_segment(handle) + "/batches", encode(batch), 200));
}

std::string HttpTrainerClient::finalize(const std::string& handle) {
  const auto body = json::parse(post("/v1/jobs/" + encode_segment(handle) + "/finalize", "{}", 200));
  return required<std::string>(body, "adapter_ref");
}

std::string HttpTrainerClient::generate(const std::string& handle_or_ref, const std::string& prompt,
                                        int max_tokens, const Decoding& decoding) {
  const json request{{"prompt", prompt}, {"max_tokens", max_tokens}, {"decoding", decoding}};
  const auto body = json::parse(
      post("/v1/jobs/" + encode_segment(handle_or_ref) + "/generate", request.dump(), 200));
  return required<std::string>(body, "text");
}

std::size_t HttpTrainerClient::tokenize(std::string_view text) {
  const auto body =
      json::parse(post("/v1/tokenize", json{{"text", std::string(text)}}.dump(), 200));
  return required<std::size_t>(body, "count");
}

// ---- server ----

TrainerHttpServer::TrainerHttpServer(Trainer& backend, std::string api_key)
    : backend_(backend), api_key_(std::move(api_key)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

TrainerHttpServer::~TrainerHttpServer() { stop(); }

void TrainerHttpServer::install_routes() {
  auto& srv = *server_;

  srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (api_key_.empty() || req.path == "/v1/healthz") return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + api_key_) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    res.status = 401;
    res.set_content(R"({"error":{"kind":"TrainerUnavailable","message":"unauthorized"}})", kJson);
    return httplib::Server::HandlerResponse::Handled;
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      res.status = http_status_for(e.kind());
      res.set_content(error_body(e), kJson);
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(error_body(Error(ErrorKind::TrainerUnavailable, e.what())), kJson);
    }
  });

  srv.Get("/v1/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", kJson);
  });

  srv.Post("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    const auto job = parse_body(req).get<TrainerJob>();
    res.status = 201;
    res.set_content(json{{"job_id", backend_.create_job(job)}}.dump(), kJson);
  });

  srv.Post(R"(/v1/jobs/(.+)/batches)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto batch = parse_body(req).get<TaskBatch>();
    res.set_content(encode(backend_.train_batch(req.matches[1], batch)), kJson);
  });

  srv.Post(R"(/v1/jobs/(.+)/finalize)", [this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(json{{"adapter_ref", backend_.finalize(req.matches[1])}}.dump(), kJson);
  });

  srv.Post(R"(/v1/jobs/(.+)/generate)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto text = backend_.generate(
        req.matches[1], required<std::string>(body, "prompt"), required<int>(body, "max_tokens"),
        optional_or<Decoding>(body, "decoding", Decoding::greedy()));
    res.set_content(json{{"text", text}}.dump(), kJson);
  });

  srv.Post("/v1/tokenize", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    res.set_content(json{{"count", backend_.tokenize(required<std::string>(body, "text"))}}.dump(),
                    kJson);
  });
}

int TrainerHttpServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorKind::TrainerUnavailable, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void TrainerHttpServer::serve(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) {
    throw Error(ErrorKind::TrainerUnavailable, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void TrainerHttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string TrainerHttpServer::url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace lift
