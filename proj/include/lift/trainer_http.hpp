// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <thread>

#include "lift/errors.hpp"
#include "lift/trainer.hpp"

namespace httplib {
class Server;
}

namespace lift {

// Trainer worker protocol over HTTP:
//   POST /v1/jobs                    TrainerJob       -> 201 {job_id}
//   POST /v1/jobs/{id}/batches       TaskBatch        -> 200 BatchLossReport
//   POST /v1/jobs/{id}/finalize                       -> 200 {adapter_ref}
//   POST /v1/jobs/{id}/generate      {prompt, max_tokens, decoding} -> 200 {text}
//   POST /v1/tokenize                {text}           -> 200 {count}
//   GET  /v1/healthz                                  -> 200 {status}
// Errors carry {"error": {"kind", "message"}} with 404 for unknown job/ref,
// 409 for state conflicts and 422 for validation failures.
int http_status_for(ErrorKind kind);

class HttpTrainerClient final : public Trainer {
 public:
  explicit HttpTrainerClient(TrainerEndpoint endpoint);

  std::string create_job(const TrainerJob& job) override;
  BatchLossReport train_batch(const std::string& handle, const TaskBatch& batch) override;
  std::string finalize(const std::string& handle) override;
  std::string generate(const std::string& handle_or_ref, const std::string& prompt,
                       int max_tokens, const Decoding& decoding) override;
  std::size_t tokenize(std::string_view text) override;

 private:
  std::string post(const std::string& path, const std::string& body, int expected_status);

  TrainerEndpoint endpoint_;
  std::string api_key_;
};

// Serves any Trainer (normally a MockTrainer) over the worker protocol.
class TrainerHttpServer {
 public:
  explicit TrainerHttpServer(Trainer& backend, std::string api_key = {});
  ~TrainerHttpServer();

  TrainerHttpServer(const TrainerHttpServer&) = delete;
  TrainerHttpServer& operator=(const TrainerHttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void serve(const std::string& host, int port);
  void stop();
  int port() const noexcept { return port_; }
  std::string url() const;

 private:
  void install_routes();

  Trainer& backend_;
  std::string api_key_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace lift
