#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "trackbc/controller.hpp"
#include "trackbc/demo.hpp"
#include "trackbc/record.hpp"
#include "trackbc/sim.hpp"

namespace trackbc::teleop {

// ---------------------------------------------------------------------------
// Wire messages

struct ActionMsg {
  ActionTriple action;
};
struct SaveMsg {
  std::string name;
};
struct ResetMsg {};

using ClientMessage = std::variant<ActionMsg, SaveMsg, ResetMsg>;

namespace detail {

inline int channel(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ParseError(std::string("teleop: missing number field ") + key);
  const double v = j.at(key).get<double>();
  if (std::floor(v) != v) throw ParseError(std::string("teleop: field ") + key + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace detail

inline ClientMessage parse_client_message(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("teleop: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw ParseError("teleop: message needs a string type");
  }
  const auto type = j.at("type").get<std::string>();
  if (type == "action") {
    ActionTriple a{detail::channel(j, "u_a"), detail::channel(j, "u_s"), detail::channel(j, "u_m")};
    if (!is_valid(a)) throw ParseError("teleop: action " + to_string(a) + " out of range");
    return ActionMsg{a};
  }
  if (type == "save") {
    std::string name = j.value("name", std::string{});
    return SaveMsg{name};
  }
  if (type == "reset") return ResetMsg{};
  throw ParseError("teleop: unknown message type " + type);
}

inline nlohmann::json action_message(const ActionTriple& a) {
  return {{"type", "action"}, {"u_a", a.arm}, {"u_s", a.steering}, {"u_m", a.movement}};
}

// Keeps [A-Za-z0-9_-], everything else becomes '_'.
inline std::string safe_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    out += ok ? c : '_';
  }
  return out.empty() ? "demo" : out;
}

// ---------------------------------------------------------------------------
// Session: one simulator, one recording, one latest-action cell. Only tick()
// and reset() touch simulator state.

class TeleopSession {
 public:
  TeleopSession(ScenarioSpec spec, std::string id, ControllerKind kind = ControllerKind::Mobility,
                SimConfig config = {})
      : id_(std::move(id)), kind_(kind), sim_(std::move(spec), config) {
    start();
  }

  const std::string& id() const { return id_; }
  std::int64_t ticks() const { return recorder_->tick(); }
  bool recording() const { return recording_; }
  const Simulator& simulator() const { return sim_; }

  // Latest message wins; the cell decays to idle after every tick.
  void command(const ActionTriple& a) {
    check_triple(a);
    std::lock_guard lock(cell_mutex_);
    cell_ = a;
  }

  ActionTriple pending() const {
    std::lock_guard lock(cell_mutex_);
    return cell_;
  }

  nlohmann::json tick() {
    ActionTriple a;
    {
      std::lock_guard lock(cell_mutex_);
      a = cell_;
      cell_ = kIdle;
    }
    const Observation obs = quantize(recorder_->observation());
    mode_ = update_mode(mode_, obs, loop_, static_cast<double>(recorder_->tick()) / kControlHz);
    recorder_->apply(a);
    last_obs_ = quantize(recorder_->observation());
    return state_frame();
  }

  nlohmann::json state_frame() const {
    const SimState& s = sim_.state();
    return {{"type", "state"},
            {"t", s.t()},
            {"x", s.x},
            {"lateral", s.lateral},
            {"yaw", s.yaw},
            {"pitch", s.pitch},
            {"roll", s.roll},
            {"distance", last_obs_.distance},
            {"fallen", fallen_name(s.fallen)},
            {"arm_pose", arm_pose_name(s.arm_pose)},
            {"mode", mode_name(mode_.mode)},
            {"recording", recording_}};
  }

  nlohmann::json scenario_frame() const {
    nlohmann::json j = to_json(sim_.scenario());
    j["type"] = "scenario";
    j["session"] = id_;
    j["control_hz"] = kControlHz;
    return j;
  }

  Demonstration recorded(bool complete) const {
    Demonstration d = recorder_->finish(complete);
    return d;
  }

  // Writes the recording and stops it; returns nothing when no tick was recorded.
  std::optional<std::filesystem::path> save(const std::filesystem::path& dir, const std::string& name) {
    if (!recording_ || recorder_->tick() == 0) return std::nullopt;
    const auto path = dir / (safe_name(name.empty() ? id_ : name) + ".demo");
    save_demo(path, recorded(true));
    recording_ = false;
    return path;
  }

  // On disconnect: an unsaved recording is kept, flagged incomplete.
  std::optional<std::filesystem::path> save_partial(const std::filesystem::path& dir) {
    if (!recording_ || recorder_->tick() == 0) return std::nullopt;
    const auto path = dir / (safe_name(id_) + ".partial.demo");
    save_demo(path, recorded(false));
    recording_ = false;
    return path;
  }

  void reset() {
    sim_.reset();
    start();
    std::lock_guard lock(cell_mutex_);
    cell_ = kIdle;
  }

 private:
  void start() {
    RecordOptions opt;
    opt.kind = kind_;
    opt.created_by = "teleop";
    opt.max_ticks = std::numeric_limits<std::int64_t>::max();
    recorder_ = std::make_unique<Recorder>(sim_, opt);
    last_obs_ = quantize(recorder_->observation());
    mode_ = ModeState{};
    recording_ = true;
  }

  std::string id_;
  ControllerKind kind_;
  Simulator sim_;
  std::unique_ptr<Recorder> recorder_;
  LoopConfig loop_;
  ModeState mode_;
  Observation last_obs_;
  bool recording_ = true;
  mutable std::mutex cell_mutex_;
  ActionTriple cell_ = kIdle;
};

// Applies one client message. Returns the reply frame, if any.
inline std::optional<nlohmann::json> handle_message(TeleopSession& s, const ClientMessage& msg,
                                                    const std::filesystem::path& out_dir) {
  if (const auto* a = std::get_if<ActionMsg>(&msg)) {
    s.command(a->action);
    return std::nullopt;
  }
  if (const auto* sv = std::get_if<SaveMsg>(&msg)) {
    const auto path = s.save(out_dir, sv->name);
    return nlohmann::json{{"type", "saved"}, {"path", path ? nlohmann::json(path->string()) : nlohmann::json()}};
  }
  s.reset();
  return s.scenario_frame();
}

// ---------------------------------------------------------------------------
// Server: one client at a time over a web socket. Network intake and the sim
// tick both run on one io_context thread and meet in the session's action
// cell.

struct ServerOptions {
  unsigned short port = 8765;
  std::string address = "127.0.0.1";
  std::filesystem::path out_dir = ".";
  ControllerKind kind = ControllerKind::Mobility;
  std::chrono::milliseconds period{100};  // wall-clock tick period
  int max_sessions = 0;                    // 0 serves until stop()
  bool log = true;
};

class TeleopServer {
 public:
  TeleopServer(ScenarioSpec spec, ServerOptions opt)
      : spec_(std::move(spec)), opt_(std::move(opt)), acceptor_(ioc_) {
    validate(spec_);
    namespace asio = boost::asio;
    const asio::ip::tcp::endpoint ep(asio::ip::make_address(opt_.address), opt_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void run() {
    accept();
    ioc_.run();
  }

  // Safe from any thread.
  void stop() {
    boost::asio::post(ioc_, [this] {
      stopping_ = true;
      boost::system::error_code ec;
      acceptor_.close(ec);
      if (auto c = conn_) c->close();
    });
  }

 private:
  using tcp = boost::asio::ip::tcp;
  using WebSocket = boost::beast::websocket::stream<tcp::socket>;

  struct Connection : std::enable_shared_from_this<Connection> {
    Connection(TeleopServer& srv, tcp::socket sock, std::string id)
        : server(srv), ws(std::move(sock)), timer(srv.ioc_), session(srv.spec_, std::move(id), srv.opt_.kind) {}

    void start() {
      auto self = shared_from_this();
      ws.text(true);
      ws.async_accept([self](boost::beast::error_code ec) {
        if (ec) return self->finish("handshake failed: " + ec.message());
        self->send(self->session.scenario_frame());
        self->read();
        self->schedule();
      });
    }

    void read() {
      auto self = shared_from_this();
      ws.async_read(buffer, [self](boost::beast::error_code ec, std::size_t) {
        if (ec) return self->finish(ec == boost::beast::websocket::error::closed ? "client closed" : ec.message());
        const std::string text = boost::beast::buffers_to_string(self->buffer.data());
        self->buffer.consume(self->buffer.size());
        try {
          if (auto reply = handle_message(self->session, parse_client_message(text), self->server.opt_.out_dir)) {
            self->send(*reply);
          }
        } catch (const Error& e) {
          self->server.log(self->session.id() + ": dropped message: " + e.what());
        }
        self->read();
      });
    }

    void schedule() {
      auto self = shared_from_this();
      timer.expires_after(server.opt_.period);
      timer.async_wait([self](boost::beast::error_code ec) {
        if (ec || self->done) return;
        self->send(self->session.tick());
        self->schedule();
      });
    }

    void send(const nlohmann::json& frame) {
      outbox.push_back(frame.dump());
      if (outbox.size() == 1) write();
    }

    void write() {
      auto self = shared_from_this();
      ws.async_write(boost::asio::buffer(outbox.front()), [self](boost::beast::error_code ec, std::size_t) {
        if (ec) return self->finish(ec.message());
        self->outbox.pop_front();
        if (!self->outbox.empty()) self->write();
      });
    }

    void close() {
      boost::beast::error_code ec;
      boost::beast::get_lowest_layer(ws).close(ec);
      finish("server stopping");
    }

    void finish(const std::string& why) {
      if (done) return;
      done = true;
      timer.cancel();
      if (auto p = session.save_partial(server.opt_.out_dir)) server.log(session.id() + ": partial demo " + p->string());
      server.log(session.id() + ": ended (" + why + ")");
      server.session_ended();
    }

    TeleopServer& server;
    WebSocket ws;
    boost::asio::steady_timer timer;
    boost::beast::flat_buffer buffer;
    std::deque<std::string> outbox;
    TeleopSession session;
    bool done = false;
  };

  void accept() {
    acceptor_.async_accept([this](boost::beast::error_code ec, tcp::socket sock) {
      if (ec) return;
      conn_ = std::make_shared<Connection>(*this, std::move(sock), "session-" + std::to_string(++sessions_));
      log(conn_->session.id() + ": connected");
      conn_->start();
    });
  }

  void session_ended() {
    conn_.reset();
    if (stopping_ || (opt_.max_sessions > 0 && sessions_ >= opt_.max_sessions)) {
      boost::system::error_code ec;
      acceptor_.close(ec);
      return;
    }
    accept();
  }

  void log(const std::string& line) const {
    if (opt_.log) std::cerr << "teleop: " << line << "\n";
  }

  ScenarioSpec spec_;
  ServerOptions opt_;
  boost::asio::io_context ioc_;
  tcp::acceptor acceptor_;
  std::shared_ptr<Connection> conn_;
  int sessions_ = 0;
  bool stopping_ = false;
};

}  // namespace trackbc::teleop
