#pragma once

// HTTP + WebSocket front end for SessionManager. All routes live under /v1.

#include <cstdint>
#include <memory>
#include <string>

#include "microworld/session.hpp"

namespace mw {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Routing without any networking; `target` includes the query string.
HttpReply handle_request(SessionManager& sessions, const std::string& method,
                         const std::string& target, const std::string& body);

class Server {
 public:
  // Port 0 picks a free port.
  Server(SessionManager& sessions, const std::string& address, std::uint16_t port);
  ~Server();

  std::uint16_t port() const;
  // Blocks until stop() is called or SIGINT/SIGTERM arrives.
  void run(unsigned threads = 1);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mw
