#pragma once

#include <memory>
#include <string>

#include "ngd/app/session.hpp"

namespace httplib {
class Server;
}

namespace ngd::app {

// JSON API over a SessionStore:
//   POST /api/session                 -> {"session_id"}
//   GET  /api/session/{id}/state
//   POST /api/session/{id}/instruct   {"text"}
//   POST /api/session/{id}/step       {"count"}
//   POST /api/session/{id}/reset      {"seed"?}
class InstructServer {
 public:
  explicit InstructServer(std::shared_ptr<const InstructModels> models,
                          std::uint64_t seed = 1);
  ~InstructServer();

  // Binds and serves until stop(); port 0 picks a free port.
  bool bind(const std::string& host, int port);
  int port() const { return port_; }
  void listen();  // blocks
  void stop();

 private:
  SessionStore store_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

}  // namespace ngd::app
