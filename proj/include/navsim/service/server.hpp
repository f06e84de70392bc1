#pragma once

#include "navsim/planning/grid.hpp"
#include "navsim/planning/jps.hpp"
#include "navsim/runtime/simulator.hpp"
#include "navsim/service/protocol.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace navsim {

class ServiceError : public Error {
 public:
  using Error::Error;
};

struct ServiceOptions {
  double speed = 1.0;            // simulated seconds per wall second; 0 runs unthrottled
  double telemetry_hz = 30.0;    // upper bound for telemetry subscriptions
  double map_hz = 2.0;           // upper bound for map layer updates
  double voxels_hz = 1.0;        // upper bound for voxel frames
  std::size_t max_control_queue = 1024;  // undelivered acks/events before a session is dropped
  int send_buffer_bytes = 0;     // per-socket SO_SNDBUF; 0 keeps the OS default
};

/// Operator-facing WebSocket bridge. The simulation steps in its own thread;
/// sessions live on a single I/O thread. Commands cross to the simulation
/// through an inbox drained at tick boundaries; state crosses back through
/// latest-value snapshots, so a slow client only loses its own frames.
class SimService {
  using tcp = boost::asio::ip::tcp;

 public:
  SimService(SimConfig cfg, WorldModel world, ScenarioScript script, std::uint64_t seed, ServiceOptions opt = {})
      : cfg_(std::move(cfg)), world_(std::move(world)), script_(std::move(script)), seed_(seed), opt_(opt) {
    make_core(seed_);
  }

  ~SimService() { stop(); }

  SimService(const SimService&) = delete;
  SimService& operator=(const SimService&) = delete;

  /// Binds the listening socket; returns the bound port (useful with port 0).
  unsigned short listen(unsigned short port, const std::string& address = "0.0.0.0") {
    boost::system::error_code ec;
    const tcp::endpoint ep(boost::asio::ip::make_address(address, ec), port);
    if (ec) throw ServiceError("invalid listen address: " + address);
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(boost::asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(boost::asio::socket_base::max_listen_connections, ec);
    if (ec) throw ServiceError("cannot bind port " + std::to_string(port) + ": " + ec.message());
    return acceptor_.local_endpoint().port();
  }

  void start() {
    if (running_) return;
    running_ = true;
    do_accept();
    schedule_broadcast();
    io_thread_ = std::thread([this] { ioc_.run(); });
    sim_thread_ = std::thread([this] { sim_loop(); });
  }

  void stop() {
    if (!running_) return;
    stop_ = true;
    if (sim_thread_.joinable()) sim_thread_.join();
    boost::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      timer_.cancel();
      for (auto& [id, s] : sessions_) s->close(boost::beast::websocket::close_code::going_away, "server shutdown");
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ioc_.stop();
    if (io_thread_.joinable()) io_thread_.join();
    running_ = false;
  }

  // -- observation hooks (thread-safe) ---------------------------------------
  double sim_time() const { return sim_time_.load(); }
  std::uint64_t ticks() const { return ticks_.load(); }
  std::uint64_t epoch() const { return epoch_.load(); }
  bool paused() const { return paused_.load(); }

  /// The server's current occupancy layer, as sent to clients.
  protocol::LayerImage occupancy_export() const {
    std::lock_guard lk(snap_mtx_);
    return snap_.occupancy ? *snap_.occupancy : protocol::LayerImage{};
  }
  protocol::LayerImage esdf_export() const {
    std::lock_guard lk(snap_mtx_);
    return snap_.esdf ? *snap_.esdf : protocol::LayerImage{};
  }

 private:
  // ---------------------------------------------------------------------------
  // Snapshots shared between the simulation and I/O threads.

  struct Snapshot {
    std::shared_ptr<const nlohmann::json> telemetry;
    double telemetry_t = 0.0;
    std::uint64_t telemetry_seq = 0;
    std::shared_ptr<const protocol::LayerImage> occupancy;
    std::shared_ptr<const protocol::LayerImage> esdf;
    std::uint64_t map_version = 0;
    double map_t = 0.0;
    std::shared_ptr<const std::string> voxels;
    std::uint64_t voxel_count = 0;
    std::uint64_t voxels_version = 0;
    double voxels_t = 0.0;
    std::shared_ptr<const nlohmann::json> path;
    std::uint64_t path_version = 0;
    double path_t = 0.0;
    std::uint64_t epoch = 0;
  };

  struct Inbound {
    std::uint64_t session = 0;
    std::uint64_t ref = 0;
    nlohmann::json payload;
  };

  // ---------------------------------------------------------------------------
  // Session

  class Session : public std::enable_shared_from_this<Session> {
   public:
    Session(SimService& svc, tcp::socket socket, std::uint64_t id) : svc_(svc), ws_(std::move(socket)), id_(id) {}

    std::uint64_t id() const { return id_; }
    bool is_operator = false;

    /// At most one frame per 1/max_hz slot of simulation time, so any window
    /// of length W carries at most max_hz * W + 1 frames.
    struct Subscription {
      double max_hz = 0.0;
      double last_t = -1e9;
      bool open(double t) const { return std::floor(t * max_hz + 1e-9) > std::floor(last_t * max_hz + 1e-9); }
    };
    std::optional<Subscription> telemetry, map, voxels;
    bool path = false;
    bool events = false;

    std::uint64_t telemetry_seq = 0;
    std::uint64_t map_version = 0;
    std::uint64_t epoch = 0;
    std::shared_ptr<const protocol::LayerImage> sent_occupancy, sent_esdf;
    bool need_keyframe = true;
    std::uint64_t voxels_version = 0;
    std::uint64_t path_version = 0;

    void run() {
      ws_.set_option(boost::beast::websocket::stream_base::timeout::suggested(boost::beast::role_type::server));
      ws_.async_accept([self = shared_from_this()](boost::beast::error_code ec) {
        if (ec) return self->svc_.drop(self->id_);
        self->svc_.on_open(self);
        self->read();
      });
    }

    /// Frames that must arrive (hello, ack, nack, event).
    void send_control(const std::string& type, double t, nlohmann::json payload) {
      if (closing_) return;
      if (queue_.size() >= svc_.opt_.max_control_queue) {
        close(boost::beast::websocket::close_code::policy_error, "client too slow");
        return;
      }
      enqueue(protocol::envelope(seq_++, type, t, std::move(payload)).dump(), false);
    }

    /// Latest-value frames: dropped when the socket still has queued output.
    bool send_data(const std::string& type, double t, const nlohmann::json& payload) {
      if (closing_ || !queue_.empty()) return false;
      enqueue(protocol::envelope(seq_++, type, t, payload).dump(), false);
      return true;
    }

    bool send_binary(std::string frame) {
      if (closing_) return false;
      enqueue(std::move(frame), true);
      return true;
    }

    bool idle() const { return queue_.empty(); }

    void close(boost::beast::websocket::close_code code, const std::string& reason) {
      if (closing_) return;
      closing_ = true;
      ws_.async_close(boost::beast::websocket::close_reason(code, reason),
                      [self = shared_from_this()](boost::beast::error_code) { self->svc_.drop(self->id_); });
    }

   private:
    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
        if (ec) return self->svc_.drop(self->id_);
        if (!self->ws_.got_text()) {
          self->buffer_.consume(self->buffer_.size());
          self->close(boost::beast::websocket::close_code::bad_payload, "binary frames are not accepted");
          return;
        }
        const std::string text = boost::beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->svc_.on_message(self, text);
        if (!self->closing_) self->read();
      });
    }

    void enqueue(std::string data, bool binary) {
      queue_.emplace_back(std::move(data), binary);
      if (queue_.size() == 1) write_next();
    }

    void write_next() {
      auto& [data, binary] = queue_.front();
      ws_.binary(binary);
      ws_.async_write(boost::asio::buffer(data), [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
        if (ec) return self->svc_.drop(self->id_);
        self->queue_.pop_front();
        if (!self->queue_.empty()) self->write_next();
      });
    }

    SimService& svc_;
    boost::beast::websocket::stream<boost::beast::tcp_stream> ws_;
    boost::beast::flat_buffer buffer_;
    std::deque<std::pair<std::string, bool>> queue_;
    std::uint64_t id_;
    std::uint64_t seq_ = 0;
    bool closing_ = false;
  };

  // ---------------------------------------------------------------------------
  // I/O thread

  void do_accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      if (opt_.send_buffer_bytes > 0) socket.set_option(boost::asio::socket_base::send_buffer_size(opt_.send_buffer_bytes), ec);
      auto s = std::make_shared<Session>(*this, std::move(socket), next_session_++);
      sessions_.emplace(s->id(), s);
      s->run();
      do_accept();
    });
  }

  void drop(std::uint64_t id) {
    sessions_.erase(id);
    if (operator_ == id) operator_.reset();
  }

  void on_open(const std::shared_ptr<Session>& s) {
    nlohmann::json world;
    const auto& b = world_.bounds();
    world["bounds"] = {{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min}, {"y_max", b.y_max}};
    world["obstacles"] = nlohmann::json::array();
    for (const auto& o : world_.obstacles())
      world["obstacles"].push_back({{"min", {o.min.x(), o.min.y(), o.min.z()}}, {"max", {o.max.x(), o.max.y(), o.max.z()}}});
    nlohmann::json config = {{"physics_dt", cfg_.physics_dt},
                             {"speed_limit", cfg_.speed_limit},
                             {"voxel_size", cfg_.voxel_size},
                             {"map_dims", cfg_.map_dims},
                             {"inflation_radius", cfg_.inflation_radius},
                             {"camera_hz", cfg_.camera_hz},
                             {"imu_hz", cfg_.imu_hz},
                             {"global_hz", cfg_.planner.global_hz},
                             {"local_hz", cfg_.planner.local_hz}};
    s->send_control("hello", sim_time(),
                    {{"protocol", protocol::kVersion},
                     {"server", "navsim"},
                     {"session", s->id()},
                     {"role", "observer"},
                     {"operator_available", !operator_.has_value()},
                     {"world", world},
                     {"config", config},
                     {"limits",
                      {{"telemetry_hz", opt_.telemetry_hz}, {"map_hz", opt_.map_hz}, {"voxels_hz", opt_.voxels_hz}}},
                     {"topics", {"telemetry", "map", "voxels", "path", "events"}}});
  }

  void nack(const std::shared_ptr<Session>& s, std::uint64_t ref, const std::string& kind, protocol::NackReason r,
            const std::string& message, nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json p = {{"ref", ref}, {"kind", kind}, {"reason", protocol::to_string(r)}, {"message", message}};
    for (auto& [k, v] : extra.items()) p[k] = v;
    s->send_control("nack", sim_time(), std::move(p));
  }

  void on_message(const std::shared_ptr<Session>& s, const std::string& text) {
    const auto env = protocol::parse_envelope(text);
    if (!env) {
      s->close(boost::beast::websocket::close_code::bad_payload, "malformed message");
      return;
    }
    const auto& p = env->payload;
    if (env->type == "hello") {
      const std::string role = p.value("role", std::string("observer"));
      if (role == "operator") {
        if (operator_ && *operator_ != s->id()) {
          nack(s, env->seq, "hello", protocol::NackReason::authority_denied, "another session holds operator authority");
          return;
        }
        operator_ = s->id();
        s->is_operator = true;
      } else if (role == "observer") {
        if (operator_ == s->id()) operator_.reset();
        s->is_operator = false;
      } else {
        nack(s, env->seq, "hello", protocol::NackReason::invalid_payload, "role must be operator or observer");
        return;
      }
      s->send_control("ack", sim_time(), {{"ref", env->seq}, {"kind", "hello"}, {"role", role}});
    } else if (env->type == "subscribe") {
      handle_subscribe(s, env->seq, p);
    } else if (env->type == "command") {
      const std::string kind = p.value("kind", std::string());
      static const std::vector<std::string> kinds{"set_goal", "teleop", "mode", "pause", "resume", "reset"};
      if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
        nack(s, env->seq, kind, protocol::NackReason::unsupported, "unknown command kind");
        return;
      }
      if (!s->is_operator) {
        nack(s, env->seq, kind, protocol::NackReason::no_authority, "command requires operator authority");
        return;
      }
      std::lock_guard lk(inbox_mtx_);
      inbox_.push_back({s->id(), env->seq, p});
    } else {
      nack(s, env->seq, env->type, protocol::NackReason::unsupported, "unsupported message type");
    }
  }

  void handle_subscribe(const std::shared_ptr<Session>& s, std::uint64_t ref, const nlohmann::json& p) {
    if (!p.contains("topics") || !p["topics"].is_object()) {
      nack(s, ref, "subscribe", protocol::NackReason::invalid_payload, "expected payload.topics object");
      return;
    }
    nlohmann::json granted = nlohmann::json::object();
    for (auto& [name, want] : p["topics"].items()) {
      const double req = want.is_object() ? want.value("max_hz", 0.0) : 0.0;
      auto rate = [&](double cap) { return req > 0.0 ? std::min(req, cap) : cap; };
      if (name == "telemetry") {
        s->telemetry = Session::Subscription{rate(opt_.telemetry_hz)};
        granted[name] = {{"max_hz", s->telemetry->max_hz}};
      } else if (name == "map") {
        s->map = Session::Subscription{rate(opt_.map_hz)};
        s->need_keyframe = true;
        granted[name] = {{"max_hz", s->map->max_hz}};
      } else if (name == "voxels") {
        s->voxels = Session::Subscription{rate(opt_.voxels_hz)};
        granted[name] = {{"max_hz", s->voxels->max_hz}};
      } else if (name == "path") {
        s->path = true;
        granted[name] = nlohmann::json::object();
      } else if (name == "events") {
        s->events = true;
        granted[name] = nlohmann::json::object();
      } else {
        nack(s, ref, "subscribe", protocol::NackReason::invalid_payload, "unknown topic '" + name + "'");
        return;
      }
    }
    if (p.value("resync", false)) s->need_keyframe = true;
    s->send_control("ack", sim_time(), {{"ref", ref}, {"kind", "subscribe"}, {"topics", granted}});
  }

  void schedule_broadcast() {
    timer_.expires_after(std::chrono::milliseconds(10));
    timer_.async_wait([this](boost::system::error_code ec) {
      if (ec) return;
      broadcast();
      schedule_broadcast();
    });
  }

  void broadcast() {
    Snapshot snap;
    {
      std::lock_guard lk(snap_mtx_);
      snap = snap_;
    }
    for (auto& [id, s] : sessions_) {
      (void)id;
      if (s->epoch != snap.epoch) {
        // Reset: time restarts, so the per-topic throttles do too.
        s->epoch = snap.epoch;
        for (auto* sub : {&s->telemetry, &s->map, &s->voxels})
          if (*sub) (*sub)->last_t = -1e9;
        s->need_keyframe = true;
        s->path_version = 0;
      }
      if (s->telemetry && snap.telemetry && snap.telemetry_seq != s->telemetry_seq &&
          s->telemetry->open(snap.telemetry_t)) {
        if (s->send_data("telemetry", snap.telemetry_t, *snap.telemetry)) {
          s->telemetry_seq = snap.telemetry_seq;
          s->telemetry->last_t = snap.telemetry_t;
        }
      }
      if (s->map && snap.occupancy) send_map(*s, snap);
      if (s->voxels && snap.voxels && snap.voxels_version != s->voxels_version && s->idle() &&
          s->voxels->open(snap.voxels_t)) {
        s->send_data("voxels", snap.voxels_t,
                     {{"count", snap.voxel_count},
                      {"voxel_size", cfg_.voxel_size},
                      {"version", snap.voxels_version},
                      {"encoding", "NVS1"}});
        s->send_binary(*snap.voxels);
        s->voxels_version = snap.voxels_version;
        s->voxels->last_t = snap.voxels_t;
      }
      if (s->path && snap.path && snap.path_version != s->path_version) {
        if (s->send_data("path", snap.path_t, *snap.path)) s->path_version = snap.path_version;
      }
    }
  }

  void send_map(Session& s, const Snapshot& snap) {
    if (!s.need_keyframe && (snap.map_version == s.map_version || !s.map->open(snap.map_t))) return;
    if (!s.idle()) return;
    auto emit = [&](const std::shared_ptr<const protocol::LayerImage>& cur,
                    std::shared_ptr<const protocol::LayerImage>& sent) {
      if (!cur) return;
      if (s.need_keyframe || !sent) {
        s.send_control("map_keyframe", snap.map_t, protocol::keyframe_payload(*cur, snap.map_version));
      } else {
        const auto r = protocol::dirty_rect(*sent, *cur);
        if (!r.empty())
          s.send_control("map_delta", snap.map_t, protocol::delta_payload(*cur, r, snap.map_version, s.map_version));
      }
      sent = cur;
    };
    emit(snap.occupancy, s.sent_occupancy);
    emit(snap.esdf, s.sent_esdf);
    s.need_keyframe = false;
    s.map_version = snap.map_version;
    s.map->last_t = snap.map_t;
  }

  void post_to_session(std::uint64_t id, std::string type, double t, nlohmann::json payload) {
    boost::asio::post(ioc_, [this, id, type = std::move(type), t, payload = std::move(payload)]() mutable {
      auto it = sessions_.find(id);
      if (it != sessions_.end()) it->second->send_control(type, t, std::move(payload));
    });
  }

  void post_event(double t, nlohmann::json payload) {
    boost::asio::post(ioc_, [this, t, payload = std::move(payload)] {
      for (auto& [id, s] : sessions_)
        if (s->events) s->send_control("event", t, payload);
    });
  }

  // ---------------------------------------------------------------------------
  // Simulation thread

  void make_core(std::uint64_t seed) {
    core_ = std::make_unique<SimulationCore>(cfg_, world_, script_, seed);
    core_->log().set_retain(false);
    core_->log().set_event_hook([this](const EventRecord& e) {
      post_event(e.t, {{"kind", e.kind}, {"t", e.t}, {"data", e.data}, {"epoch", epoch_.load()}});
    });
    map_seen_version_ = ~std::uint64_t{0};
    voxels_seen_version_ = ~std::uint64_t{0};
    path_seen_ = nullptr;
    last_voxel_t_ = -1e9;
    last_map_t_ = -1e9;
  }

  void sim_loop() {
    using clock = std::chrono::steady_clock;
    auto wall0 = clock::now();
    double sim0 = core_->time();
    publish_snapshots(true);
    while (!stop_) {
      const bool rebased = drain_inbox();
      if (rebased) {
        wall0 = clock::now();
        sim0 = core_->time();
      }
      if (paused_ || core_->finished()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        wall0 = clock::now();
        sim0 = core_->time();
        continue;
      }
      core_->step();
      sim_time_ = core_->time();
      ++ticks_;
      publish_snapshots(core_->finished());
      if (core_->finished())
        post_event(core_->time(), {{"kind", "end"},
                                   {"t", core_->time()},
                                   {"data", {{"verdict", to_string(core_->verdict())}, {"reason", core_->verdict_reason()}}},
                                   {"epoch", epoch_.load()}});
      if (opt_.speed > 0.0) {
        const auto target = wall0 + std::chrono::duration_cast<clock::duration>(
                                        std::chrono::duration<double>((core_->time() - sim0) / opt_.speed));
        // Short naps so stop and queued commands are not held up at low speeds.
        while (!stop_ && target > clock::now()) {
          {
            std::lock_guard lk(inbox_mtx_);
            if (!inbox_.empty()) break;
          }
          std::this_thread::sleep_until(std::min(target, clock::now() + std::chrono::milliseconds(5)));
        }
      }
    }
  }

  /// Applies queued commands at the tick boundary. Returns true after a reset.
  bool drain_inbox() {
    std::vector<Inbound> batch;
    {
      std::lock_guard lk(inbox_mtx_);
      batch.swap(inbox_);
    }
    bool rebased = false;
    for (auto& in : batch) rebased |= handle_command(in);
    return rebased;
  }

  bool handle_command(const Inbound& in) {
    using protocol::NackReason;
    const auto& p = in.payload;
    const std::string kind = p.value("kind", std::string());
    const double t = core_->time();
    auto nack_cmd = [&](NackReason r, const std::string& msg, nlohmann::json extra = nlohmann::json::object()) {
      nlohmann::json body = {{"ref", in.ref}, {"kind", kind}, {"reason", protocol::to_string(r)}, {"message", msg}};
      for (auto& [k, v] : extra.items()) body[k] = v;
      post_to_session(in.session, "nack", t, std::move(body));
    };
    auto ack_cmd = [&](nlohmann::json extra = nlohmann::json::object()) {
      nlohmann::json body = {{"ref", in.ref}, {"kind", kind}, {"t_applied", t}};
      for (auto& [k, v] : extra.items()) body[k] = v;
      post_to_session(in.session, "ack", t, std::move(body));
    };
    auto number = [&](const char* key, double& out) {
      if (!p.contains(key) || !p[key].is_number()) return false;
      out = p[key].get<double>();
      return std::isfinite(out);
    };

    if (kind == "pause") {
      paused_ = true;
      ack_cmd();
      return false;
    }
    if (kind == "resume") {
      paused_ = false;
      ack_cmd();
      return true;
    }
    if (kind == "reset") {
      std::uint64_t seed = seed_;
      if (p.contains("seed")) {
        if (!p["seed"].is_number_unsigned() && !p["seed"].is_number_integer()) {
          nack_cmd(NackReason::invalid_payload, "seed must be a non-negative integer");
          return false;
        }
        seed = p["seed"].get<std::uint64_t>();
      }
      ++epoch_;
      make_core(seed);
      sim_time_ = 0.0;
      paused_ = false;
      publish_snapshots(true);
      ack_cmd({{"seed", seed}, {"epoch", epoch_.load()}, {"t_applied", 0.0}});
      return true;
    }
    if (paused_) {
      nack_cmd(NackReason::sim_paused, "simulation is paused");
      return false;
    }
    if (kind == "set_goal") {
      double x = 0.0, y = 0.0;
      if (!number("x", x) || !number("y", y)) {
        nack_cmd(NackReason::invalid_payload, "set_goal needs numeric x and y");
        return false;
      }
      if (core_->mode() != MissionMode::click_and_fly) {
        nack_cmd(NackReason::wrong_mode, "set_goal requires auto mode");
        return false;
      }
      if (!world_.bounds().contains_xy(x, y)) {
        nack_cmd(NackReason::out_of_bounds, "goal outside the world bounds");
        return false;
      }
      if (auto blocked = goal_blocked(Vec2(x, y))) {
        nlohmann::json extra = nlohmann::json::object();
        if (blocked->suggestion)
          extra["suggestion"] = {{"x", blocked->suggestion->x()}, {"y", blocked->suggestion->y()}};
        nack_cmd(NackReason::invalid_goal, blocked->why, extra);
        return false;
      }
      CoreCommand c;
      c.kind = CoreCommand::Kind::set_goal;
      c.goal = Vec2(x, y);
      core_->submit(c);
      ack_cmd({{"goal", {x, y}}});
      return false;
    }
    if (kind == "teleop") {
      double vx = 0.0, vy = 0.0, vz = 0.0, wz = 0.0;
      if (!number("vx", vx) || !number("vy", vy) || !number("vz", vz)) {
        nack_cmd(NackReason::invalid_payload, "teleop needs numeric vx, vy, vz");
        return false;
      }
      if (p.contains("yaw_rate") && !number("yaw_rate", wz)) {
        nack_cmd(NackReason::invalid_payload, "yaw_rate must be numeric");
        return false;
      }
      if (core_->mode() != MissionMode::manual) {
        nack_cmd(NackReason::wrong_mode, "teleop requires manual mode");
        return false;
      }
      bool clamped = false;
      const Vec3 v = CascadeController::clamp_speed(Vec3(vx, vy, vz), cfg_.speed_limit, &clamped);
      const double yaw_limit = ControllerGains{}.yaw_rate_limit;
      if (std::abs(wz) > yaw_limit) {
        wz = std::copysign(yaw_limit, wz);
        clamped = true;
      }
      CoreCommand c;
      c.kind = CoreCommand::Kind::teleop;
      c.velocity = v;
      c.yaw_rate = wz;
      core_->submit(c);
      ack_cmd({{"clamped", clamped}, {"applied", {{"vx", v.x()}, {"vy", v.y()}, {"vz", v.z()}, {"yaw_rate", wz}}}});
      return false;
    }
    if (kind == "mode") {
      const std::string m = p.value("mode", std::string());
      if (m != "manual" && m != "auto") {
        nack_cmd(NackReason::invalid_payload, "mode must be manual or auto");
        return false;
      }
      CoreCommand c;
      c.kind = CoreCommand::Kind::mode;
      c.mode = m == "manual" ? MissionMode::manual : MissionMode::click_and_fly;
      core_->submit(c);
      ack_cmd({{"mode", m}});
      return false;
    }
    nack_cmd(NackReason::unsupported, "unknown command kind");
    return false;
  }

  struct Blocked {
    std::string why;
    std::optional<Vec2> suggestion;
  };

  /// A goal is rejected when it falls on an inflated obstacle of the current
  /// map or inside a solid obstacle footprint. The suggestion is the nearest
  /// cell center that is free under both tests.
  std::optional<Blocked> goal_blocked(const Vec2& goal) const {
    const ProjectedGrid2D& grid = core_->projected_grid();
    const PlanningGrid g = preprocess_grid(grid, cfg_.inflation_radius, CellState::free, {}, 0);
    // preprocess_grid crops; re-project into full-grid coordinates.
    auto free_at = [&](const Vec2& p) {
      if (world_.footprint_clearance(p.x(), p.y()) < cfg_.inflation_radius) return false;
      if (g.width == 0) return true;
      const auto c = g.cell_of(p);
      return !g.in_bounds(c[0], c[1]) || g.passable(c[0], c[1]);
    };
    if (free_at(goal)) return std::nullopt;
    Blocked b;
    b.why = world_.footprint_clearance(goal.x(), goal.y()) < cfg_.inflation_radius
                ? "goal lies within the inflation radius of an obstacle"
                : "goal lies on a mapped obstacle";
    const auto c = grid.cell_of(goal);
    const int max_r = static_cast<int>(std::ceil(3.0 / grid.resolution));
    double best = std::numeric_limits<double>::infinity();
    for (int dy = -max_r; dy <= max_r; ++dy)
      for (int dx = -max_r; dx <= max_r; ++dx) {
        const double d2 = dx * dx + dy * dy;
        if (d2 >= best || d2 > max_r * max_r) continue;
        if (!grid.in_bounds(c[0] + dx, c[1] + dy)) continue;
        const Vec2 q = grid.center_of(c[0] + dx, c[1] + dy);
        if (!world_.bounds().contains_xy(q.x(), q.y()) || !free_at(q)) continue;
        best = d2;
        b.suggestion = q;
      }
    return b;
  }

  void publish_snapshots(bool force) {
    const double t = core_->time();
    const int tick_hz = cfg_.tick_hz();
    Snapshot next;
    {
      std::lock_guard lk(snap_mtx_);
      next = snap_;
    }
    next.epoch = epoch_.load();
    bool changed = false;
    if (force || rate_due(core_->tick(), opt_.telemetry_hz, tick_hz)) {
      const auto& s = core_->state();
      const auto& e = core_->estimate();
      auto j = std::make_shared<nlohmann::json>(nlohmann::json{
          {"t", t},
          {"epoch", next.epoch},
          {"position", {s.position.x(), s.position.y(), s.position.z()}},
          {"velocity", {s.velocity.x(), s.velocity.y(), s.velocity.z()}},
          {"attitude", {s.attitude.w(), s.attitude.x(), s.attitude.y(), s.attitude.z()}},
          {"body_rate", {s.body_rate.x(), s.body_rate.y(), s.body_rate.z()}},
          {"estimate",
           {{"position", {e.pose.position.x(), e.pose.position.y(), e.pose.position.z()}},
            {"velocity", {e.velocity.x(), e.velocity.y(), e.velocity.z()}}}},
          {"mode", core_->mode() == MissionMode::manual ? "manual" : "auto"},
          {"verdict", to_string(core_->verdict())},
          {"goals_pending", core_->goals().size()},
          {"paused", paused_.load()}});
      next.telemetry = std::move(j);
      next.telemetry_t = t;
      ++next.telemetry_seq;
      changed = true;
    }
    const auto map_version = core_->global_map().version();
    if ((force || t >= last_map_t_ + 1.0 / opt_.map_hz - 1e-9) && map_version != map_seen_version_) {
      map_seen_version_ = map_version;
      last_map_t_ = t;
      next.occupancy = std::make_shared<protocol::LayerImage>(protocol::occupancy_image(core_->projected_grid()));
      if (core_->esdf())
        next.esdf = std::make_shared<protocol::LayerImage>(protocol::esdf_image(*core_->esdf()));
      else
        next.esdf = std::make_shared<protocol::LayerImage>(
            protocol::esdf_image(compute_esdf(core_->projected_grid(), CellState::free, cfg_.mapping.esdf_d_max)));
      ++next.map_version;
      next.map_t = t;
      changed = true;
    }
    if ((force || t >= last_voxel_t_ + 1.0 / opt_.voxels_hz - 1e-9) && map_version != voxels_seen_version_) {
      voxels_seen_version_ = map_version;
      last_voxel_t_ = t;
      const auto vox = protocol::occupied_voxels(core_->global_map(), cfg_.mapping.projection.p_occ);
      next.voxels = std::make_shared<std::string>(protocol::encode_voxels(vox, static_cast<float>(cfg_.voxel_size)));
      next.voxel_count = vox.size();
      ++next.voxels_version;
      next.voxels_t = t;
      changed = true;
    }
    const auto& path = core_->global_path();
    const GlobalPath* pp = path ? &*path : nullptr;
    if (pp != path_seen_ || (pp && path_waypoints_ != pp->waypoints)) {
      path_seen_ = pp;
      path_waypoints_ = pp ? pp->waypoints : std::vector<Vec2>{};
      nlohmann::json j;
      j["global"] = nlohmann::json::array();
      if (pp)
        for (const auto& w : pp->waypoints) j["global"].push_back({w.x(), w.y()});
      const auto& wp = core_->local_waypoint();
      j["local_waypoint"] = wp ? nlohmann::json{wp->x(), wp->y(), wp->z()} : nlohmann::json(nullptr);
      j["goals"] = nlohmann::json::array();
      for (const auto& g : core_->goals()) j["goals"].push_back({g.x(), g.y()});
      next.path = std::make_shared<nlohmann::json>(std::move(j));
      ++next.path_version;
      next.path_t = t;
      changed = true;
    }
    if (changed || force) {
      std::lock_guard lk(snap_mtx_);
      snap_ = std::move(next);
    }
  }

  SimConfig cfg_;
  WorldModel world_;
  ScenarioScript script_;
  std::uint64_t seed_;
  ServiceOptions opt_;

  // simulation thread state
  std::unique_ptr<SimulationCore> core_;
  std::uint64_t map_seen_version_ = ~std::uint64_t{0};
  std::uint64_t voxels_seen_version_ = ~std::uint64_t{0};
  const GlobalPath* path_seen_ = nullptr;
  std::vector<Vec2> path_waypoints_;
  double last_map_t_ = -1e9;
  double last_voxel_t_ = -1e9;

  // shared
  mutable std::mutex snap_mtx_;
  Snapshot snap_;
  std::mutex inbox_mtx_;
  std::vector<Inbound> inbox_;
  std::atomic<double> sim_time_{0.0};
  std::atomic<std::uint64_t> ticks_{0};
  std::atomic<std::uint64_t> epoch_{0};
  std::atomic<bool> paused_{false};
  std::atomic<bool> stop_{false};
  bool running_ = false;

  // I/O thread state
  boost::asio::io_context ioc_{1};
  tcp::acceptor acceptor_{ioc_};
  boost::asio::steady_timer timer_{ioc_};
  std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;
  std::optional<std::uint64_t> operator_;
  std::uint64_t next_session_ = 1;
  std::thread io_thread_;
  std::thread sim_thread_;
};

}  // namespace navsim
