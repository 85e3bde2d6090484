#pragma once

// Live telemetry and command service.
//
// One simulation thread owns the closed loop. Every tick it drains the
// command queue, advances the world (unless paused or finished) and
// broadcasts an immutable JSON snapshot. Sockets run on a separate I/O
// thread; each subscriber has a bounded queue that drops its oldest frame
// when full, so a slow client never stalls the loop.
//
// Endpoints: GET /healthz (JSON status), WebSocket /ws.
// Frames (schema 1), all carrying "type", "schema" and a global "seq":
//   tick:  t, k, stale, paused, finished, vehicle{x,y,psi,v,steering},
//          navigation, intention, phase, D_o, obstacles[{lane,x,length,width}],
//          events[]
//   event: name = "command" (audit: command, args, client_id) or "client"
//   error: message
// Commands: {"type":"cmd","name":N,"args":{...},"client_id":ID} with N one of
//   set_navigation {command}, pause, resume, reset, set_speed {speed [m/s]}.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "cma/harness/config.hpp"

namespace cma {

inline constexpr int kTelemetrySchema = 1;

struct ServeOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  // Simulated seconds per wall-clock second; <= 0 runs unpaced.
  double time_scale = 1.0;
  std::size_t queue_capacity = 64;
};

struct Command {
  std::string name;
  nlohmann::json args = nlohmann::json::object();
  std::string client_id;
};

// Either a validated command or a description of what is wrong with it.
std::variant<Command, std::string> ParseCommand(std::string_view text);

class TelemetryServer {
 public:
  // Binds immediately; throws Error(kIoError) when the port is taken.
  TelemetryServer(HarnessConfig cfg, ServeOptions options);
  ~TelemetryServer();
  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;

  std::uint16_t port() const;
  void Start();
  void Stop();
  // Blocks until Stop() is called from another thread.
  void Wait();

  struct Impl;  // defined in serve.cpp

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace cma
