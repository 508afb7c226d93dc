#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <thread>

#include "microworld/server.hpp"

namespace mw {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

class LiveServer : public ::testing::Test {
 protected:
  void SetUp() override {
    server = std::make_unique<Server>(sessions, "127.0.0.1", 0);
    thread = std::thread([this] { server->run(2); });
  }
  void TearDown() override {
    server->stop();
    thread.join();
  }

  http::response<http::string_body> request(http::verb verb, const std::string& target,
                                            const std::string& body = "") {
    boost::asio::io_context io;
    beast::tcp_stream stream(io);
    stream.connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), server->port()));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "localhost");
    req.set(http::field::content_type, "application/json");
    req.body() = body;
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return res;
  }

  SessionManager sessions;
  std::unique_ptr<Server> server;
  std::thread thread;
};

const char* kConfig = R"({
  "world": {"agents": ["ana"], "locations": ["bench", "sink"], "objects": ["beaker"],
            "initial": {"agents": {"ana": "bench"}, "objects": {"beaker": "bench"}}},
  "source_text": ["Take the beaker to the sink."]})";

TEST_F(LiveServer, UnknownSessionIs404) {
  EXPECT_EQ(request(http::verb::get, "/v1/sessions/bad").result_int(), 404);
  EXPECT_EQ(request(http::verb::get, "/v1/health").result_int(), 200);
}

TEST_F(LiveServer, StreamDeliversSteps) {
  auto created = request(http::verb::post, "/v1/sessions", kConfig);
  ASSERT_EQ(created.result_int(), 201);
  const auto id = nlohmann::json::parse(created.body())["id"].get<std::string>();

  boost::asio::io_context io;
  websocket::stream<tcp::socket> ws(io);
  ws.next_layer().connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), server->port()));
  ws.handshake("localhost", "/v1/sessions/" + id + "/stream");
  beast::flat_buffer buffer;
  ws.read(buffer);
  auto hello = nlohmann::json::parse(beast::buffers_to_string(buffer.data()));
  EXPECT_EQ(hello["type"], "hello");
  EXPECT_EQ(hello["state"]["id"], id);
  buffer.clear();

  auto cmd = request(http::verb::post, "/v1/sessions/" + id + "/command",
                     R"({"text": "grab the beaker", "segment": 0})");
  EXPECT_EQ(cmd.result_int(), 200);
  ws.read(buffer);
  auto step = nlohmann::json::parse(beast::buffers_to_string(buffer.data()));
  EXPECT_EQ(step["type"], "step");
  EXPECT_EQ(step["step"], 0);
  ws.close(websocket::close_code::normal);
}

TEST_F(LiveServer, StreamForUnknownSessionIsRefused) {
  boost::asio::io_context io;
  websocket::stream<tcp::socket> ws(io);
  ws.next_layer().connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), server->port()));
  EXPECT_THROW(ws.handshake("localhost", "/v1/sessions/bad/stream"), beast::system_error);
}

}  // namespace
}  // namespace mw
