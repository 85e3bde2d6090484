#include "cma/harness/serve.hpp"

#include <map>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "cma/error.hpp"
#include "gtest/gtest.h"

namespace cma {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
using tcp = asio::ip::tcp;
using nlohmann::json;

// Blocking client; frames flow continuously, so reads do not stall.
class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/ws");
  }
  json Read() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }
  // Reads until a frame matches, giving up after max_frames.
  json ReadUntil(const std::function<bool(const json&)>& pred, int max_frames = 2000) {
    for (int i = 0; i < max_frames; ++i) {
      json f = Read();
      if (pred(f)) return f;
    }
    ADD_FAILURE() << "no matching frame";
    return {};
  }
  void Send(const std::string& text) { ws_.write(asio::buffer(text)); }
  void Command(const std::string& name, json args = json::object()) {
    Send(json{{"type", "cmd"}, {"name", name}, {"args", args}, {"client_id", "test"}}.dump());
  }

 private:
  asio::io_context ioc_;
  beast::websocket::stream<tcp::socket> ws_;
};

HarnessConfig ClearRoad() {
  HarnessConfig cfg;
  cfg.scenario.horizon = 60.0;
  return cfg;
}

ServeOptions Fast() {
  ServeOptions o;
  o.port = 0;
  o.time_scale = 10.0;
  return o;
}

bool IsTick(const json& f) { return f.at("type") == "tick"; }
bool IsCommandEvent(const json& f, const std::string& name) {
  return f.at("type") == "event" && f.at("name") == "command" && f.at("command") == name;
}

TEST(ParseCommand, AcceptsAndRejects) {
  auto ok = [](std::string_view s) { return std::holds_alternative<Command>(ParseCommand(s)); };
  EXPECT_TRUE(ok(R"({"type":"cmd","name":"pause"})"));
  EXPECT_TRUE(ok(R"({"type":"cmd","name":"set_navigation","args":{"command":"ChangeToLeft"}})"));
  EXPECT_TRUE(ok(R"({"type":"cmd","name":"set_speed","args":{"speed":5}})"));
  EXPECT_FALSE(ok("not json"));
  EXPECT_FALSE(ok(R"({"type":"tick","name":"pause"})"));
  EXPECT_FALSE(ok(R"({"type":"cmd","name":"fly"})"));
  EXPECT_FALSE(ok(R"({"type":"cmd","name":"set_navigation","args":{"command":"Up"}})"));
  EXPECT_FALSE(ok(R"({"type":"cmd","name":"set_speed","args":{"speed":-1}})"));
  EXPECT_FALSE(ok(R"({"type":"cmd","name":"set_speed"})"));
  const auto c = std::get<Command>(
      ParseCommand(R"({"type":"cmd","name":"reset","client_id":"abc"})"));
  EXPECT_EQ(c.client_id, "abc");
}

TEST(Serve, TwoClientsSeeIdenticalFrames) {
  TelemetryServer server(ClearRoad(), Fast());
  server.Start();
  Client a(server.port()), b(server.port());
  std::map<std::int64_t, std::string> seen_a, seen_b;
  std::thread ta([&] {
    for (int i = 0; i < 200; ++i) {
      const json f = a.Read();
      seen_a[f.at("seq").get<std::int64_t>()] = f.dump();
    }
  });
  for (int i = 0; i < 200; ++i) {
    const json f = b.Read();
    seen_b[f.at("seq").get<std::int64_t>()] = f.dump();
  }
  ta.join();
  server.Stop();
  int common = 0;
  for (const auto& [seq, text] : seen_a) {
    auto it = seen_b.find(seq);
    if (it == seen_b.end()) continue;
    ++common;
    EXPECT_EQ(it->second, text) << "seq " << seq;
  }
  EXPECT_GE(common, 150);
}

TEST(Serve, NavigationTakesEffectWithinTwoTicks) {
  TelemetryServer server(ClearRoad(), Fast());
  server.Start();
  Client c(server.port());
  const json before = c.ReadUntil(IsTick);
  EXPECT_EQ(before.at("intention"), "StayInLane");
  c.Command("set_navigation", {{"command", "ChangeToLeft"}});
  c.ReadUntil([](const json& f) { return IsCommandEvent(f, "set_navigation"); });
  int ticks = 0;
  bool changed = false;
  while (ticks < 2 && !changed) {
    const json f = c.ReadUntil([](const json& f) { return IsTick(f) && !f.at("stale"); });
    ++ticks;
    changed = f.at("intention") == "ChangeToLeft" && f.at("navigation") == "ChangeToLeft";
  }
  server.Stop();
  EXPECT_TRUE(changed);
}

TEST(Serve, PauseFreezesAndResumeContinues) {
  TelemetryServer server(ClearRoad(), Fast());
  server.Start();
  Client c(server.port());
  c.ReadUntil(IsTick);
  c.Command("pause");
  c.ReadUntil([](const json& f) { return IsCommandEvent(f, "pause"); });
  const json first = c.ReadUntil(IsTick);
  EXPECT_TRUE(first.at("stale"));
  EXPECT_TRUE(first.at("paused"));
  for (int i = 0; i < 5; ++i) {
    const json f = c.ReadUntil(IsTick);
    EXPECT_TRUE(f.at("stale"));
    EXPECT_EQ(f.at("k"), first.at("k"));
    EXPECT_TRUE(f.at("events").empty());
  }
  c.Command("resume");
  c.ReadUntil([](const json& f) { return IsCommandEvent(f, "resume"); });
  const json next = c.ReadUntil(IsTick);
  server.Stop();
  EXPECT_FALSE(next.at("stale"));
  EXPECT_GT(next.at("k").get<int>(), first.at("k").get<int>());
}

TEST(Serve, MalformedCommandGetsErrorFrame) {
  TelemetryServer server(ClearRoad(), Fast());
  server.Start();
  Client c(server.port());
  c.Send("{oops");
  const json err = c.ReadUntil([](const json& f) { return f.at("type") == "error"; });
  EXPECT_FALSE(err.at("message").get<std::string>().empty());
  // The session survives and keeps streaming.
  EXPECT_EQ(c.ReadUntil(IsTick).at("schema"), kTelemetrySchema);
  server.Stop();
}

TEST(Serve, HealthzAndUnknownPath) {
  TelemetryServer server(ClearRoad(), Fast());
  server.Start();
  auto get = [&](const std::string& target) {
    asio::io_context ioc;
    beast::tcp_stream stream(ioc);
    tcp::resolver resolver(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(server.port())));
    beast::http::request<beast::http::string_body> req{beast::http::verb::get, target, 11};
    req.set(beast::http::field::host, "127.0.0.1");
    beast::http::write(stream, req);
    beast::flat_buffer buffer;
    beast::http::response<beast::http::string_body> res;
    beast::http::read(stream, buffer, res);
    return res;
  };
  const auto ok = get("/healthz");
  EXPECT_EQ(ok.result(), beast::http::status::ok);
  const json body = json::parse(ok.body());
  EXPECT_EQ(body.at("status"), "ok");
  EXPECT_EQ(body.at("schema"), kTelemetrySchema);
  EXPECT_EQ(get("/nope").result(), beast::http::status::not_found);
  server.Stop();
}

TEST(Serve, BusyPortIsAnError) {
  TelemetryServer first(ClearRoad(), Fast());
  ServeOptions same = Fast();
  same.port = first.port();
  try {
    TelemetryServer second(ClearRoad(), same);
    FAIL() << "bound a busy port";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

}  // namespace
}  // namespace cma
