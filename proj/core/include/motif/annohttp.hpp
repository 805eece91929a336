// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "motif/annoservice.hpp"

namespace httplib {
class Server;
}

namespace motif::anno {

struct ServerOptions {
  std::filesystem::path log_dir = ".";     // one <session>.jsonl per session
  std::filesystem::path asset_root = ".";  // video and image refs resolve here
  Clock clock = steady_clock_seconds();
};

// HTTP front end. Bodies are JSON.
//   POST /sessions                          create a session from a SessionConfig
//   GET  /sessions/:id                      task count and progress
//   GET  /sessions/:id/next?annotator=A     next task for A, or {"done": true}
//   GET  /sessions/:id/tasks/:task/:slot    slot = image | left | right
//   GET  /assets/<path>                     raw asset under asset_root
//   POST /sessions/:id/votes                submit a VoteRecord
//   GET  /sessions/:id/aggregate            AggregateResult
class AnnoServer {
 public:
  explicit AnnoServer(ServerOptions options);
  ~AnnoServer();
  AnnoServer(const AnnoServer&) = delete;
  AnnoServer& operator=(const AnnoServer&) = delete;

  // Returns the session id.
  std::string create_session(const SessionConfig& config);
  // Registers a session rebuilt from an existing log.
  std::string load_session(const std::filesystem::path& log_path);
  Service* service(const std::string& session_id);

  // Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  bool listen();
  void stop();
  bool running() const;

 private:
  void routes();
  bool asset_exists(const std::string& ref) const;
  std::optional<std::filesystem::path> resolve(const std::string& ref) const;

  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Service>> sessions_;
};

}  // namespace motif::anno
