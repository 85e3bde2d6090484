#include "cma/harness/serve.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>

#include "cma/error.hpp"
#include "cma/harness/run.hpp"

namespace cma {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Frame = std::shared_ptr<const std::string>;

nlohmann::json VehicleJson(const VehicleState& v) {
  return {{"x", v.x}, {"y", v.y}, {"psi", v.psi}, {"v", v.v}, {"steering", v.steering}};
}

}  // namespace

std::variant<Command, std::string> ParseCommand(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return std::string("command is not valid JSON");
  }
  if (!j.is_object()) return std::string("command must be a JSON object");
  if (j.value("type", "") != "cmd") return std::string("type must be \"cmd\"");
  if (!j.contains("name") || !j["name"].is_string()) return std::string("name must be a string");
  Command c;
  c.name = j["name"].get<std::string>();
  if (j.contains("args")) {
    if (!j["args"].is_object()) return std::string("args must be an object");
    c.args = j["args"];
  }
  if (j.contains("client_id")) {
    if (!j["client_id"].is_string()) return std::string("client_id must be a string");
    c.client_id = j["client_id"].get<std::string>();
  }
  if (c.name == "set_navigation") {
    const auto it = c.args.find("command");
    if (it == c.args.end() || !it->is_string() ||
        !ParseNavigationCommand(it->get<std::string>())) {
      return std::string(
          "set_navigation needs args.command = StayInLane | ChangeToLeft | ChangeToRight");
    }
  } else if (c.name == "set_speed") {
    const auto it = c.args.find("speed");
    if (it == c.args.end() || !it->is_number() || !(it->get<double>() >= 0.0) ||
        !std::isfinite(it->get<double>())) {
      return std::string("set_speed needs args.speed >= 0 [m/s]");
    }
  } else if (c.name != "pause" && c.name != "resume" && c.name != "reset") {
    return fmt::format("unknown command '{}'", c.name);
  }
  return c;
}

class WsSession;

struct TelemetryServer::Impl {
  Impl(HarnessConfig cfg, ServeOptions opt)
      : options(std::move(opt)),
        loop(cfg.scenario, MakeController(cfg).controller),
        acceptor(ioc) {
    beast::error_code ec;
    const tcp::endpoint ep(asio::ip::make_address(options.address, ec), options.port);
    if (ec) throw Error(ErrorCode::kConfigInvalid, "bad address " + options.address);
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
      throw Error(ErrorCode::kIoError,
                  fmt::format("cannot listen on {}:{}: {}", options.address, options.port,
                              ec.message()));
    }
    last.vehicle = loop.world().vehicle;
  }

  void Accept();
  void Broadcast(Frame frame);
  void SimLoop();
  void Apply(const Command& c);
  std::string TickFrame(bool stale);
  std::string EventFrame(nlohmann::json body);
  Frame ErrorFrame(const std::string& message) {
    return std::make_shared<const std::string>(
        nlohmann::json{{"type", "error"}, {"schema", kTelemetrySchema}, {"seq", seq++},
                       {"message", message}}
            .dump());
  }

  ServeOptions options;
  ClosedLoop loop;  // simulation thread only
  TickRecord last;
  bool paused = false;

  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::set<std::shared_ptr<WsSession>> sessions;  // I/O thread only

  std::mutex command_mutex;
  std::deque<Command> commands;

  std::atomic<std::uint64_t> seq{0};
  std::atomic<int> tick_index{0};
  std::atomic<bool> paused_flag{false};
  std::atomic<int> client_count{0};

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopping = false;
  std::thread io_thread, sim_thread;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, TelemetryServer::Impl& hub)
      : ws_(std::move(socket)), hub_(hub) {}

  void Run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->hub_.sessions.insert(self);
      ++self->hub_.client_count;
      self->Read();
    });
  }

  void Enqueue(Frame frame) {
    if (closed_) return;
    if (pending_.size() >= hub_.options.queue_capacity) pending_.pop_front();
    pending_.push_back(std::move(frame));
    if (!writing_) Write();
  }

 private:
  void Read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->Close();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      auto parsed = ParseCommand(text);
      if (auto* c = std::get_if<Command>(&parsed)) {
        std::lock_guard lock(self->hub_.command_mutex);
        self->hub_.commands.push_back(std::move(*c));
      } else {
        self->Enqueue(self->hub_.ErrorFrame(std::get<std::string>(parsed)));
      }
      self->Read();
    });
  }

  void Write() {
    writing_ = true;
    inflight_ = std::move(pending_.front());
    pending_.pop_front();
    ws_.text(true);
    ws_.async_write(asio::buffer(*inflight_),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->writing_ = false;
                      if (ec) return self->Close();
                      if (!self->pending_.empty()) self->Write();
                    });
  }

  void Close() {
    if (closed_) return;
    closed_ = true;
    pending_.clear();
    if (hub_.sessions.erase(shared_from_this()) > 0) --hub_.client_count;
  }

  websocket::stream<beast::tcp_stream> ws_;
  TelemetryServer::Impl& hub_;
  beast::flat_buffer buffer_;
  std::deque<Frame> pending_;
  Frame inflight_;
  bool writing_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, TelemetryServer::Impl& hub)
      : stream_(std::move(socket)), hub_(hub) {}

  void Run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (!ec) self->Handle();
                     });
  }

 private:
  void Handle() {
    if (websocket::is_upgrade(req_) && req_.target() == "/ws") {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), hub_)->Run(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(false);
    res->set(http::field::content_type, "application/json");
    if (req_.method() == http::verb::get && req_.target() == "/healthz") {
      res->result(http::status::ok);
      res->body() = nlohmann::json{{"status", "ok"},
                                   {"schema", kTelemetrySchema},
                                   {"tick", hub_.tick_index.load()},
                                   {"paused", hub_.paused_flag.load()},
                                   {"clients", hub_.client_count.load()}}
                        .dump();
    } else {
      res->result(http::status::not_found);
      res->body() = R"({"error":"not found"})";
    }
    res->prepare_payload();
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code, std::size_t) {
                        beast::error_code ignored;
                        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                      });
  }

  beast::tcp_stream stream_;
  TelemetryServer::Impl& hub_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

void TelemetryServer::Impl::Accept() {
  acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpSession>(std::move(socket), *this)->Run();
    Accept();
  });
}

void TelemetryServer::Impl::Broadcast(Frame frame) {
  asio::post(ioc, [this, frame = std::move(frame)] {
    for (const auto& s : std::vector(sessions.begin(), sessions.end())) s->Enqueue(frame);
  });
}

std::string TelemetryServer::Impl::EventFrame(nlohmann::json body) {
  body["type"] = "event";
  body["schema"] = kTelemetrySchema;
  body["seq"] = seq++;
  body["t"] = last.t;
  return body.dump();
}

std::string TelemetryServer::Impl::TickFrame(bool stale) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Obstacle& o : loop.world().obstacles) {
    if (!o.ActiveAt(loop.world().t)) continue;
    obstacles.push_back({{"lane", o.lane}, {"x", o.x}, {"length", o.length}, {"width", o.width}});
  }
  return nlohmann::json{{"type", "tick"},
                        {"schema", kTelemetrySchema},
                        {"seq", seq++},
                        {"t", last.t},
                        {"k", last.k},
                        {"stale", stale},
                        {"paused", paused},
                        {"finished", loop.finished()},
                        {"vehicle", VehicleJson(last.vehicle)},
                        {"navigation", ToString(loop.navigation())},
                        {"intention", ToString(last.intention)},
                        {"phase", ToString(last.phase)},
                        {"D_o", last.D_o},
                        {"obstacles", obstacles},
                        {"events", stale ? std::vector<std::string>{} : last.events}}
      .dump();
}

void TelemetryServer::Impl::Apply(const Command& c) {
  if (c.name == "set_navigation") {
    loop.SetNavigation(*ParseNavigationCommand(c.args["command"].get<std::string>()));
  } else if (c.name == "set_speed") {
    loop.SetCruiseSpeed(c.args["speed"].get<double>());
  } else if (c.name == "pause") {
    paused = true;
  } else if (c.name == "resume") {
    paused = false;
  } else if (c.name == "reset") {
    loop.Reset();
    last = TickRecord{};
    last.vehicle = loop.world().vehicle;
  }
  paused_flag = paused;
  Broadcast(std::make_shared<const std::string>(EventFrame(
      {{"name", "command"}, {"command", c.name}, {"args", c.args}, {"client_id", c.client_id}})));
}

void TelemetryServer::Impl::SimLoop() {
  using Clock = std::chrono::steady_clock;
  const double dt = loop.config().dt;
  const bool paced = options.time_scale > 0.0;
  const auto period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(paced ? dt / options.time_scale : 0.0));
  auto next = Clock::now();
  for (;;) {
    {
      std::unique_lock lock(stop_mutex);
      if (paced) {
        if (stop_cv.wait_until(lock, next, [this] { return stopping; })) return;
      } else if (stopping) {
        return;
      }
    }
    next += period;

    std::deque<Command> batch;
    {
      std::lock_guard lock(command_mutex);
      batch.swap(commands);
    }
    for (const Command& c : batch) Apply(c);

    const bool advance = !paused && !loop.finished();
    if (advance) {
      last = loop.Tick();
      tick_index = loop.tick_index();
    } else if (!paced) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    Broadcast(std::make_shared<const std::string>(TickFrame(!advance)));
  }
}

TelemetryServer::TelemetryServer(HarnessConfig cfg, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(options))) {}

TelemetryServer::~TelemetryServer() { Stop(); }

std::uint16_t TelemetryServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void TelemetryServer::Start() {
  impl_->Accept();
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
  impl_->sim_thread = std::thread([this] { impl_->SimLoop(); });
}

void TelemetryServer::Stop() {
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopping = true;
  }
  impl_->stop_cv.notify_all();
  if (impl_->sim_thread.joinable()) impl_->sim_thread.join();
  impl_->ioc.stop();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

void TelemetryServer::Wait() {
  std::unique_lock lock(impl_->stop_mutex);
  impl_->stop_cv.wait(lock, [this] { return impl_->stopping; });
}

}  // namespace cma
