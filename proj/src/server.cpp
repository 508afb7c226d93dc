#include "microworld/server.hpp"

#include <deque>
#include <thread>
#include <vector>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "microworld/errors.hpp"

namespace mw {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

HttpReply json_reply(int status, const nlohmann::ordered_json& body) {
  return {status, "application/json", body.dump()};
}

HttpReply error_reply(int status, const std::string& kind, const std::string& message) {
  return json_reply(status, {{"error", {{"kind", kind}, {"message", message}}}});
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string::npos) end = path.size();
    if (end > start) parts.push_back(path.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

std::string query_param(const std::string& query, const std::string& key) {
  std::size_t start = 0;
  while (start < query.size()) {
    auto end = query.find('&', start);
    if (end == std::string::npos) end = query.size();
    const auto pair = query.substr(start, end - start);
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == key) return eq == std::string::npos ? "" : pair.substr(eq + 1);
    start = end + 1;
  }
  return {};
}

nlohmann::ordered_json outcome_json(const CommandOutcome& o) {
  nlohmann::ordered_json j;
  j["ok"] = o.ok;
  j["observation"] = o.observation;
  j["delta"] = o.delta;
  j["goal_reached"] = o.goal_reached;
  if (o.ok) {
    j["step"] = o.step;
  } else {
    j["error"] = {{"kind", o.error_kind}, {"message", o.error}};
    j["hints"] = o.hints;
  }
  return j;
}

// "/v1/sessions/{id}/stream" -> id
std::optional<std::string> stream_target(const std::string& target) {
  const auto parts = split_path(target.substr(0, target.find('?')));
  if (parts.size() == 4 && parts[0] == "v1" && parts[1] == "sessions" && parts[3] == "stream") {
    return parts[2];
  }
  return std::nullopt;
}

void add_cors(http::response<http::string_body>& res) {
  res.set(http::field::access_control_allow_origin, "*");
  res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
  res.set(http::field::access_control_allow_headers, "Content-Type");
}

class WebSocketSession : public std::enable_shared_from_this<WebSocketSession> {
 public:
  WebSocketSession(tcp::socket&& socket, std::shared_ptr<Session> session)
      : ws_(std::move(socket)), session_(std::move(session)) {}

  ~WebSocketSession() {
    if (token_ >= 0) session_->unsubscribe(token_);
  }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WebSocketSession::on_accept,
                                                    shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<WebSocketSession> weak = shared_from_this();
    auto executor = ws_.get_executor();
    token_ = session_->subscribe([weak, executor](const nlohmann::ordered_json& message) {
      net::post(executor, [weak, text = message.dump()] {
        if (auto self = weak.lock()) self->send(text);
      });
    });
    send(nlohmann::ordered_json{{"type", "hello"}, {"state", session_->state_json()}}.dump());
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WebSocketSession::on_read,
                                                      shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      if (token_ >= 0) session_->unsubscribe(token_);
      token_ = -1;
      return;
    }
    buffer_.consume(buffer_.size());
    do_read();
  }

  void send(std::string text) {
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    beast::bind_front_handler(&WebSocketSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return;
    queue_.pop_front();
    if (!queue_.empty()) do_write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Session> session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  int token_ = -1;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, SessionManager& sessions)
      : stream_(std::move(socket)), sessions_(sessions) {}

  void run() {
    net::dispatch(stream_.get_executor(),
                  beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(1 << 20);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_,
                     beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) {
      const auto id = stream_target(std::string(req.target()));
      std::shared_ptr<Session> session;
      if (id) {
        try {
          session = sessions_.get(*id);
        } catch (const SessionNotFound&) {
        }
      }
      if (session) {
        stream_.expires_never();
        std::make_shared<WebSocketSession>(stream_.release_socket(), session)->run(std::move(req));
        return;
      }
      write(req, error_reply(404, "SessionNotFound", "no stream at " + std::string(req.target())));
      return;
    }
    HttpReply reply;
    if (req.method() == http::verb::options) {
      reply = {204, "text/plain", ""};
    } else {
      reply = handle_request(sessions_, std::string(req.method_string()),
                             std::string(req.target()), req.body());
    }
    write(req, reply);
  }

  void write(const http::request<http::string_body>& req, const HttpReply& reply) {
    auto res = std::make_shared<http::response<http::string_body>>(
        static_cast<http::status>(reply.status), req.version());
    res->set(http::field::server, "microworld");
    res->set(http::field::content_type, reply.content_type);
    add_cors(*res);
    res->keep_alive(req.keep_alive());
    res->body() = reply.body;
    res->prepare_payload();
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (!res->keep_alive()) {
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                          return;
                        }
                        self->do_read();
                      });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  SessionManager& sessions_;
};

class Listener : public std::enable_shared_from_this<Listener> {
 public:
  Listener(net::io_context& ioc, tcp::endpoint endpoint, SessionManager& sessions)
      : ioc_(ioc), acceptor_(net::make_strand(ioc)), sessions_(sessions) {
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(net::socket_base::max_listen_connections);
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void run() { do_accept(); }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_),
                           beast::bind_front_handler(&Listener::on_accept, shared_from_this()));
  }

  void on_accept(beast::error_code ec, tcp::socket socket) {
    if (ec == net::error::operation_aborted) return;
    if (!ec) std::make_shared<HttpSession>(std::move(socket), sessions_)->run();
    do_accept();
  }

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  SessionManager& sessions_;
};

}  // namespace

HttpReply handle_request(SessionManager& sessions, const std::string& method,
                         const std::string& target, const std::string& body) {
  const auto qpos = target.find('?');
  const auto path = target.substr(0, qpos);
  const auto query = qpos == std::string::npos ? std::string() : target.substr(qpos + 1);
  const auto parts = split_path(path);
  if (parts.empty() || parts[0] != "v1") return error_reply(404, "NotFound", "unknown route " + path);
  try {
    if (parts.size() == 2 && parts[1] == "health") {
      return json_reply(200, {{"status", "ok"}});
    }
    if (parts.size() < 2 || parts[1] != "sessions") {
      return error_reply(404, "NotFound", "unknown route " + path);
    }
    if (parts.size() == 2) {
      if (method == "GET") return json_reply(200, {{"sessions", sessions.ids()}});
      if (method != "POST") return error_reply(405, "MethodNotAllowed", method + " " + path);
      nlohmann::json config;
      try {
        config = nlohmann::json::parse(body);
      } catch (const nlohmann::json::exception& e) {
        return error_reply(400, "InvalidConfig", std::string("request body: ") + e.what());
      }
      const auto id = sessions.create(config);
      const auto session = sessions.get(id);
      return json_reply(201, {{"id", id},
                              {"observation", session->observation(session->config().initial)},
                              {"state", session->state_json()}});
    }
    const auto& id = parts[2];
    const auto session = sessions.get(id);
    const std::string action = parts.size() == 4 ? parts[3] : "";
    if (parts.size() > 4) return error_reply(404, "NotFound", "unknown route " + path);
    if (action == "command") {
      if (method != "POST") return error_reply(405, "MethodNotAllowed", method + " " + path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(body);
      } catch (const nlohmann::json::exception& e) {
        return error_reply(400, "InvalidRequest", std::string("request body: ") + e.what());
      }
      if (!doc.is_object() || !doc.contains("text") || !doc.at("text").is_string()) {
        return error_reply(400, "InvalidRequest", "expected {\"text\": string, \"segment\"?: int}");
      }
      std::optional<int> segment;
      if (doc.contains("segment") && !doc.at("segment").is_null()) {
        if (!doc.at("segment").is_number_integer()) {
          return error_reply(400, "InvalidRequest", "segment must be an integer");
        }
        segment = doc.at("segment").get<int>();
      }
      const auto outcome = sessions.execute(id, doc.at("text").get<std::string>(), segment);
      return json_reply(outcome.ok ? 200 : 422, outcome_json(outcome));
    }
    if (method != "GET") return error_reply(405, "MethodNotAllowed", method + " " + path);
    if (action.empty() || action == "state") return json_reply(200, session->state_json());
    if (action == "legal") return json_reply(200, session->legal_json());
    if (action == "trace") {
      auto name = query_param(query, "format");
      if (name.empty()) name = "trace-jsonl";
      const auto format = export_format_from_string(name);
      if (!format) {
        return error_reply(400, "InvalidRequest",
                           "format must be trace-jsonl, action-graph or program");
      }
      const char* type = *format == ExportFormat::TraceJsonl    ? "application/x-ndjson"
                         : *format == ExportFormat::ActionGraph ? "application/json"
                                                                : "text/plain";
      return {200, type, session->export_trace(*format)};
    }
    return error_reply(404, "NotFound", "unknown route " + path);
  } catch (const SessionNotFound& e) {
    return error_reply(404, "SessionNotFound", e.what());
  } catch (const InvalidConfig& e) {
    return error_reply(400, "InvalidConfig", e.what());
  } catch (const Error& e) {
    return error_reply(500, "Error", e.what());
  }
}

struct Server::Impl {
  net::io_context ioc;
  std::shared_ptr<Listener> listener;
  net::signal_set signals{ioc, SIGINT, SIGTERM};
};

Server::Server(SessionManager& sessions, const std::string& address, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  const auto endpoint = tcp::endpoint(net::ip::make_address(address), port);
  impl_->listener = std::make_shared<Listener>(impl_->ioc, endpoint, sessions);
  impl_->listener->run();
}

Server::~Server() = default;

std::uint16_t Server::port() const { return impl_->listener->port(); }

void Server::run(unsigned threads) {
  impl_->signals.async_wait([this](beast::error_code, int) { stop(); });
  std::vector<std::thread> workers;
  for (unsigned i = 1; i < threads; ++i) workers.emplace_back([this] { impl_->ioc.run(); });
  impl_->ioc.run();
  for (auto& t : workers) t.join();
}

void Server::stop() { impl_->ioc.stop(); }

}  // namespace mw
