#pragma once

#include "navsim/config.hpp"
#include "navsim/runtime/bus.hpp"
#include "navsim/runtime/log.hpp"
#include "navsim/runtime/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace navsim {

/// Operator command as applied by the core at a tick boundary.
struct CoreCommand {
  enum class Kind { set_goal, teleop, mode };
  Kind kind = Kind::set_goal;
  Vec2 goal = Vec2::Zero();
  Vec3 velocity = Vec3::Zero();  // teleop, body frame (x forward, y left, z up)
  double yaw_rate = 0.0;
  double duration = 0.0;         // teleop hold time; 0 = command timeout
  MissionMode mode = MissionMode::manual;
  std::string source = "operator";
};

/// Wall-clock accounting per pipeline stage (kept out of the log).
struct StageTiming {
  std::uint64_t count = 0;
  double total_s = 0.0;
  double max_s = 0.0;
  double mean_ms() const { return count ? 1e3 * total_s / static_cast<double>(count) : 0.0; }
  void add(double s) {
    ++count;
    total_s += s;
    max_s = std::max(max_s, s);
  }
};

struct StageTimings {
  StageTiming mapping_integration;
  StageTiming esdf;
  StageTiming global_plan;
  StageTiming local_plan;
  StageTiming render;
  StageTiming tick;
};

enum class Verdict { running, success, failure, timeout };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::running: return "running";
    case Verdict::success: return "success";
    case Verdict::failure: return "failure";
    case Verdict::timeout: return "timeout";
  }
  return "?";
}

/// Integer-accumulator rate gate on a base grid of `base_hz` slots: fires on
/// slot k when floor(k r / N) advances, so n slots yield floor(n r / N) firings.
inline bool rate_due(std::uint64_t k, double rate_hz, double base_hz) {
  if (rate_hz <= 0.0 || k == 0) return false;
  return std::floor(static_cast<double>(k) * rate_hz / base_hz + 1e-9) >
         std::floor(static_cast<double>(k - 1) * rate_hz / base_hz + 1e-9);
}

/// The stepping context. Each tick runs, in order:
///   command   pending operator commands and due scenario events
///   physics   one RK4 step, ground-truth record
///   sensors   IMU, depth camera (camera ticks are a subset of IMU ticks)
///   estimator IMU propagation, vision fix on camera ticks
///   mapping   voxel integration and local map on camera ticks; projection + ESDF on global ticks
///   planning  JPS on global ticks, HAS + primitive on local ticks, teleop streaming
///   control   cascade controller on the latched setpoint, wrench for the next tick
class SimulationCore {
 public:
  SimulationCore(SimConfig cfg, WorldModel world, ScenarioScript script, std::optional<std::uint64_t> seed = {})
      : cfg_(std::move(cfg)),
        world_(std::move(world)),
        script_(std::move(script)),
        seed_(seed.value_or(cfg_.rng_seed)),
        vp_(cfg_.vehicle()),
        controller_(vp_, ControllerGains{}, cfg_.speed_limit),
        latch_(cfg_.command_timeout),
        estimator_(cfg_.estimator, cfg_.gravity, Rng::stream(seed_, 2)),
        imu_rng_(Rng::stream(seed_, 1)),
        depth_rng_(Rng::stream(seed_, 3)),
        global_planner_(cfg_.planner),
        local_planner_(cfg_.planner),
        render_intr_(cfg_.camera.render_intrinsics()) {
    cfg_.validate();
    script_.validate();
    tick_hz_ = cfg_.tick_hz();
    mode_ = script_.mode;

    const Vec3 origin = cfg_.mapping.origin.value_or(Vec3(
        0.5 * (world_.bounds().x_min + world_.bounds().x_max) - 0.5 * cfg_.map_dims[0] * cfg_.voxel_size,
        0.5 * (world_.bounds().y_min + world_.bounds().y_max) - 0.5 * cfg_.map_dims[1] * cfg_.voxel_size, 0.0));
    gmap_ = GlobalOccupancyMap(origin, cfg_.voxel_size, cfg_.map_dims, cfg_.mapping.occupancy);
    projected_ = ProjectedGrid2D(cfg_.map_dims[0], cfg_.map_dims[1], cfg_.voxel_size, origin.head<2>());

    state_.position = script_.initial_position;
    state_.attitude = quat_from_yaw(script_.initial_yaw);
    if (world_.inside_obstacle(state_.position)) throw ConfigError("initial pose lies inside an obstacle");

    const Pose imu_pose = ground_truth_pose(state_, cfg_.body_to_imu);
    estimator_.initialize(imu_pose, Vec3::Zero(), 0.0);
    latch_.initialize(state_.position, script_.initial_yaw);
    hold_yaw_ = script_.initial_yaw;
    local_ = LocalCylindricalMap(cfg_.mapping.local, imu_pose);

    declare_topics();
    log_.header = {{"seed", seed_},
                   {"config", config_to_json(cfg_)},
                   {"scenario", scenario_to_json(script_)},
                   {"world", world_to_json(world_)}};
    wrench_ = controller_.compute(nav_state(), state_, latch_.active(0.0, state_.position, hold_yaw_), dt());
  }

  // -- configuration / state access -------------------------------------
  const SimConfig& config() const { return cfg_; }
  const WorldModel& world() const { return world_; }
  const ScenarioScript& script() const { return script_; }
  std::uint64_t seed() const { return seed_; }
  double dt() const { return cfg_.physics_dt; }
  double time() const { return static_cast<double>(tick_) / tick_hz_; }
  std::uint64_t tick() const { return tick_; }
  const RigidBodyState& state() const { return state_; }
  const OdometryEstimate& estimate() const { return estimator_.estimate(); }
  const GlobalOccupancyMap& global_map() const { return gmap_; }
  const ProjectedGrid2D& projected_grid() const { return projected_; }
  const std::optional<EsdfMap2D>& esdf() const { return esdf_; }
  const LocalCylindricalMap& local_map() const { return local_; }
  const std::optional<GlobalPath>& global_path() const { return path_; }
  const std::optional<Vec3>& local_waypoint() const { return local_wp_; }
  const std::deque<Vec2>& goals() const { return goals_; }
  MissionMode mode() const { return mode_; }
  Verdict verdict() const { return verdict_; }
  const std::string& verdict_reason() const { return verdict_reason_; }
  bool finished() const { return verdict_ != Verdict::running; }
  TopicBus& bus() { return bus_; }
  SimLog& log() { return log_; }
  const SimLog& log() const { return log_; }
  const StageTimings& timings() const { return timings_; }
  const Setpoint& active_setpoint() const { return active_sp_; }

  /// Queues an operator command; it takes effect in the command phase of the next tick.
  void submit(const CoreCommand& c) { pending_.push_back(c); }

  /// Attaches point-cloud side-file output.
  void set_cloud_writer(std::shared_ptr<CloudWriter> w) { clouds_ = std::move(w); }

  /// Advances one physics tick. No-op once the mission has ended.
  void step() {
    if (finished()) return;
    if (!header_written_) {
      log_.write_header();
      header_written_ = true;
    }
    const auto wall0 = std::chrono::steady_clock::now();
    const double t_prev = time();
    ++tick_;
    const double t = time();
    bus_.set_time(t_prev);

    phase_command(t_prev);
    bus_.set_time(t);
    if (!phase_physics(t)) return;
    const bool imu_tick = rate_due(tick_, cfg_.imu_hz, tick_hz_);
    const std::uint64_t imu_index = tick_ * static_cast<std::uint64_t>(cfg_.imu_hz) / tick_hz_;
    const bool camera_tick = imu_tick && rate_due(imu_index, cfg_.camera_hz, cfg_.imu_hz);
    const bool global_tick = rate_due(tick_, cfg_.planner.global_hz, tick_hz_);
    const bool local_tick = rate_due(tick_, cfg_.planner.local_hz, tick_hz_);

    phase_sensors(t, imu_tick, camera_tick);
    phase_estimator(t, imu_tick, camera_tick);
    phase_mapping(t, camera_tick, global_tick);
    phase_planning(t, global_tick, local_tick);
    phase_control(t);
    timings_.tick.add(std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count());

    if (!finished() && t >= script_.timeout - 1e-9) finish(t, Verdict::timeout, "mission timeout");
  }

  /// Steps until the mission ends.
  Verdict run() {
    while (!finished()) step();
    return verdict_;
  }

  /// Ends the run early (e.g. operator stop); no-op when already finished.
  void abort(const std::string& reason) {
    if (!finished()) finish(time(), Verdict::failure, reason);
  }

 private:
  using clock = std::chrono::steady_clock;

  static double seconds_since(clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  }

  static nlohmann::json world_to_json(const WorldModel& w) {
    nlohmann::json j;
    const auto& b = w.bounds();
    j["bounds"] = {{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min}, {"y_max", b.y_max}};
    j["obstacles"] = nlohmann::json::array();
    for (const auto& o : w.obstacles())
      j["obstacles"].push_back({{"min", {o.min.x(), o.min.y(), o.min.z()}}, {"max", {o.max.x(), o.max.y(), o.max.z()}}});
    return j;
  }

  void declare_topics() {
    bus_.declare<ImuSample>("imu", cfg_.imu_hz);
    bus_.declare<DepthImage>("camera/depth", cfg_.camera_hz);
    bus_.declare<PointCloud>("camera/points", cfg_.camera_hz);
    bus_.declare<ImageStub>("camera/infra1", cfg_.camera_hz);
    bus_.declare<ImageStub>("camera/infra2", cfg_.camera_hz);
    bus_.declare<ImageStub>("camera/color", cfg_.camera_hz);
    bus_.declare<RigidBodyState>("ground_truth", cfg_.ground_truth_hz);
    bus_.declare<OdometryEstimate>("imu_path", cfg_.imu_hz);
    bus_.declare<Pose>("vision_path", cfg_.camera_hz);
    bus_.declare<GlobalOccupancyMap>("globalmap", cfg_.camera_hz);
    bus_.declare<LocalCylindricalMap>("localmap", cfg_.camera_hz);
    bus_.declare<ProjectedGrid2D>("occupancygrid", cfg_.planner.global_hz);
    bus_.declare<EsdfMap2D>("esdf_map", cfg_.planner.global_hz);
    bus_.declare<GlobalPath>("jps_path", 0.0);
    bus_.declare<Vec2>("global_goal", 0.0);
    bus_.declare<Vec3>("local_wp", 0.0);
    bus_.declare<Setpoint>("cmd_vel", 0.0);
  }

  RigidBodyState nav_state() const {
    // Estimated IMU-link pose mapped back to the body origin.
    const Pose body = estimator_.estimate().pose.compose(cfg_.body_to_imu.inverse());
    RigidBodyState s = state_;
    s.position = body.position;
    s.velocity = estimator_.estimate().velocity;
    return s;
  }

  double estimated_yaw() const { return yaw_of(estimator_.estimate().pose.orientation); }

  void event(double t, Phase ph, const std::string& kind, nlohmann::json data = nlohmann::json::object()) {
    EventRecord e;
    e.t = t;
    e.phase = ph;
    e.kind = kind;
    e.data = std::move(data);
    log_.add(e);
  }

  void checkpoint(double t, Phase ph, const std::string& label) {
    MapRecord m;
    m.t = t;
    m.phase = ph;
    m.label = label;
    m.width = projected_.width;
    m.height = projected_.height;
    m.resolution = projected_.resolution;
    m.origin = projected_.origin;
    m.cells.resize(projected_.cells.size());
    for (std::size_t i = 0; i < projected_.cells.size(); ++i) {
      const CellState c = projected_.cells[i];
      m.cells[i] = c == CellState::free ? '.' : (c == CellState::occupied ? '#' : '?');
    }
    log_.add(m);
  }

  void finish(double t, Verdict v, const std::string& reason) {
    verdict_ = v;
    verdict_reason_ = reason;
    refresh_projection();
    checkpoint(t, Phase::control, "final");
    EndRecord e;
    e.t = t;
    e.phase = Phase::control;
    e.verdict = to_string(v);
    e.reason = reason;
    log_.add(e);
  }

  bool future_goal_events() const {
    for (std::size_t i = next_event_; i < script_.events.size(); ++i)
      if (script_.events[i].kind == ScenarioEvent::Kind::goal) return true;
    return false;
  }

  // -- phases ---------------------------------------------------------------

  void apply(const CoreCommand& c, double t) {
    switch (c.kind) {
      case CoreCommand::Kind::set_goal:
        goals_.push_back(c.goal);
        event(t, Phase::command, "goal_submitted", {{"x", c.goal.x()}, {"y", c.goal.y()}, {"source", c.source}});
        if (goals_.size() == 1) start_goal();
        break;
      case CoreCommand::Kind::teleop: {
        const Vec3 v = CascadeController::clamp_speed(c.velocity, cfg_.speed_limit);
        teleop_ = Teleop{v, c.yaw_rate, t + (c.duration > 0.0 ? c.duration : cfg_.command_timeout)};
        event(t, Phase::command, "teleop",
              {{"v", {v.x(), v.y(), v.z()}}, {"yaw_rate", c.yaw_rate}, {"until", teleop_->until}, {"source", c.source}});
        break;
      }
      case CoreCommand::Kind::mode:
        mode_ = c.mode;
        teleop_.reset();
        event(t, Phase::command, "mode", {{"mode", to_string(c.mode)}, {"source", c.source}});
        break;
    }
  }

  void start_goal() {
    path_.reset();
    local_goal_.reset();
    local_wp_.reset();
    local_planner_.reset();
    plan_fail_since_.reset();
    need_plan_ = true;
  }

  void phase_command(double t) {
    while (next_event_ < script_.events.size() && script_.events[next_event_].t <= t + 1e-9) {
      const auto& e = script_.events[next_event_++];
      CoreCommand c;
      c.source = "script";
      if (e.kind == ScenarioEvent::Kind::goal) {
        c.kind = CoreCommand::Kind::set_goal;
        c.goal = e.goal;
      } else {
        c.kind = CoreCommand::Kind::teleop;
        c.velocity = e.velocity;
        c.yaw_rate = e.yaw_rate;
        c.duration = e.duration;
      }
      apply(c, t);
    }
    for (const auto& c : pending_) apply(c, t);
    pending_.clear();
  }

  bool phase_physics(double t) {
    try {
      state_ = step_dynamics(state_, wrench_, vp_, dt());
    } catch (const IntegrationDivergence& e) {
      finish(t, Verdict::failure, std::string("integration divergence: ") + e.what());
      return false;
    }
    accel_ = linear_acceleration(state_.attitude, wrench_, vp_);
    GroundTruthRecord g;
    g.t = t;
    g.phase = Phase::physics;
    g.position = state_.position;
    g.velocity = state_.velocity;
    g.attitude = state_.attitude;
    g.body_rate = state_.body_rate;
    g.acceleration = accel_;
    log_.add(g);
    if (rate_due(tick_, cfg_.ground_truth_hz, tick_hz_)) bus_.publish("ground_truth", state_);
    if (world_.inside_obstacle(state_.position) || state_.position.z() <= 0.0) {
      finish(t, Verdict::failure, "collision");
      return false;
    }
    return true;
  }

  void phase_sensors(double t, bool imu_tick, bool camera_tick) {
    if (imu_tick) {
      imu_ = sample_imu(state_, accel_, cfg_.imu, imu_bias_, imu_rng_, 1.0 / cfg_.imu_hz, cfg_.gravity, t);
      bus_.publish("imu", imu_);
    }
    if (camera_tick) {
      const auto t0 = clock::now();
      const Pose cam = ground_truth_pose(state_, cfg_.body_to_imu).compose(cfg_.camera.extrinsics.left_to_imu);
      Rng* noise = cfg_.camera.depth_noise_sigma > 0.0 ? &depth_rng_ : nullptr;
      depth_ = render_depth(world_, cam, render_intr_, cfg_.camera.max_range, t, noise, cfg_.camera.depth_noise_sigma);
      cloud_ = depth_to_pointcloud(depth_, render_intr_, cfg_.camera.cloud_stride);
      timings_.render.add(seconds_since(t0));
      bus_.publish("camera/depth", depth_);
      bus_.publish("camera/points", cloud_);
      const int w = cfg_.camera.width, h = cfg_.camera.height;
      bus_.publish("camera/infra1", ImageStub{"mono8", w, h, t});
      bus_.publish("camera/infra2", ImageStub{"mono8", w, h, t});
      bus_.publish("camera/color", ImageStub{"rgb8", w, h, t});
      if (clouds_ && cfg_.log.pointcloud_every > 0 && camera_frames_ % cfg_.log.pointcloud_every == 0) {
        CloudRecord r;
        r.t = t;
        r.phase = Phase::sensors;
        r.count = static_cast<std::uint32_t>(cloud_.points.size());
        r.offset = clouds_->write(t, cloud_);
        log_.add(r);
      }
      ++camera_frames_;
    }
  }

  void phase_estimator(double t, bool imu_tick, bool camera_tick) {
    if (!imu_tick) return;
    estimator_.on_imu(imu_);
    if (camera_tick) {
      const Pose fix = estimator_.on_vision(ground_truth_pose(state_, cfg_.body_to_imu), t);
      VisionRecord v;
      v.t = t;
      v.phase = Phase::estimator;
      v.position = fix.position;
      v.attitude = fix.orientation;
      log_.add(v);
      bus_.publish("vision_path", fix);
    }
    const auto& est = estimator_.estimate();
    EstimateRecord r;
    r.t = t;
    r.phase = Phase::estimator;
    r.position = est.pose.position;
    r.velocity = est.velocity;
    r.attitude = est.pose.orientation;
    r.vision_corrected = camera_tick;
    log_.add(r);
    bus_.publish("imu_path", est);
  }

  void refresh_projection() {
    if (projected_version_ == gmap_.version()) return;
    projected_ = project_to_2d(gmap_, cfg_.mapping.projection);
    projected_version_ = gmap_.version();
    esdf_dirty_ = true;
  }

  void phase_mapping(double t, bool camera_tick, bool global_tick) {
    (void)t;
    if (camera_tick) {
      const auto t0 = clock::now();
      const Pose sensor = estimator_.estimate().pose.compose(cfg_.camera.extrinsics.left_to_imu);
      integrate_pointcloud(gmap_, sensor, cloud_);
      local_ = rebuild_local_map(cloud_, sensor, estimator_.estimate().pose, cfg_.mapping.local);
      timings_.mapping_integration.add(seconds_since(t0));
      bus_.publish("globalmap", gmap_);
      bus_.publish("localmap", local_);
    }
    if (global_tick) {
      const auto t0 = clock::now();
      refresh_projection();
      if (esdf_dirty_ || !esdf_) {
        const CellState unknown = cfg_.planner.unknown_as_free ? CellState::free : CellState::occupied;
        esdf_ = compute_esdf(projected_, unknown, cfg_.mapping.esdf_d_max);
        esdf_dirty_ = false;
      }
      timings_.esdf.add(seconds_since(t0));
      bus_.publish("occupancygrid", projected_);
      bus_.publish("esdf_map", *esdf_);
    }
  }

  void phase_planning(double t, bool global_tick, bool local_tick) {
    const Vec3 est_pos = nav_state().position;
    if (mode_ == MissionMode::click_and_fly && !goals_.empty()) {
      const Vec2 goal = goals_.front();
      if (local_tick && (est_pos.head<2>() - goal).norm() <= cfg_.planner.reach_radius) {
        goal_reached(t, goal);
        if (finished()) return;
      }
    }
    if (mode_ == MissionMode::click_and_fly && !goals_.empty()) {
      if (global_tick || need_plan_) plan_global(t, est_pos);
      if (finished()) return;
      if (local_tick && local_goal_) plan_local(t, est_pos);
    } else if (local_tick && teleop_) {
      stream_teleop(t);
    }
  }

  void goal_reached(double t, const Vec2& goal) {
    goals_.pop_front();
    ++goals_reached_;
    event(t, Phase::planning, "goal_reached", {{"x", goal.x()}, {"y", goal.y()}, {"index", goals_reached_ - 1}});
    refresh_projection();
    checkpoint(t, Phase::planning, "goal_" + std::to_string(goals_reached_ - 1));
    start_goal();
    if (goals_.empty()) {
      const Vec3 p = nav_state().position;
      latch_.submit(Setpoint{Setpoint::Kind::position, Vec3(goal.x(), goal.y(), p.z()), hold_yaw_}, t);
      if (script_.mode == MissionMode::click_and_fly && !future_goal_events() && pending_.empty())
        finish(t, Verdict::success, "all goals reached");
    }
  }

  void plan_global(double t, const Vec3& est_pos) {
    need_plan_ = false;
    const auto t0 = clock::now();
    const auto out = global_planner_.plan(projected_, est_pos.head<2>(), goals_.front());
    timings_.global_plan.add(seconds_since(t0));
    if (!out.path) {
      if (!plan_fail_since_) {
        plan_fail_since_ = t;
        event(t, Phase::planning, "plan_failed", {{"reason", out.error}});
      }
      if (t - *plan_fail_since_ > kPlanFailTimeout) finish(t, Verdict::failure, "no path to goal: " + out.error);
      return;
    }
    if (plan_fail_since_) event(t, Phase::planning, "plan_recovered");
    plan_fail_since_.reset();
    path_ = out.path;
    local_goal_ = out.local_goal;
    PathRecord r;
    r.t = t;
    r.phase = Phase::planning;
    r.waypoints = path_->waypoints;
    r.local_goal = local_goal_->point;
    log_.add(r);
    bus_.publish("jps_path", *path_);
    bus_.publish("global_goal", path_->goal);
  }

  void plan_local(double t, const Vec3& est_pos) {
    const auto t0 = clock::now();
    double remaining = 0.0;
    for (std::size_t i = 1; i < path_->waypoints.size(); ++i)
      remaining += (path_->waypoints[i] - path_->waypoints[i - 1]).norm();
    const bool final_goal = remaining <= cfg_.planner.lookahead + 1e-9;
    const auto prev = local_planner_.status();
    const auto step = local_planner_.update(t, est_pos, estimator_.estimate().velocity, local_,
                                            esdf_ ? &*esdf_ : nullptr, *local_goal_, final_goal);
    if (step.status == LocalPlanner::Status::backup && prev != LocalPlanner::Status::backup)
      event(t, Phase::planning, "backup", {{"reason", step.backup_reason}});
    const double local_dt = 1.0 / cfg_.planner.local_hz;
    const auto sp = local_planner_.command(t, local_dt, est_pos, estimated_yaw(), cfg_.speed_limit);
    timings_.local_plan.add(seconds_since(t0));
    if (step.waypoint) {
      local_wp_ = step.waypoint;
      bus_.publish("local_wp", *local_wp_);
    }
    if (sp) {
      hold_yaw_ = sp->yaw;
      submit_command(t, *sp, "planner");
    }
  }

  void stream_teleop(double t) {
    if (t > teleop_->until + 1e-9) {
      // Segment over: an explicit stop, as a released key would send.
      teleop_.reset();
      submit_command(t, Setpoint{Setpoint::Kind::velocity, Vec3::Zero(), hold_yaw_}, "teleop");
      return;
    }
    const double local_dt = 1.0 / cfg_.planner.local_hz;
    hold_yaw_ = wrap_angle(hold_yaw_ + teleop_->yaw_rate * local_dt);
    const double yaw = estimated_yaw();
    const Vec3 v = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * teleop_->velocity;
    submit_command(t, Setpoint{Setpoint::Kind::velocity, v, hold_yaw_}, "teleop");
  }

  void submit_command(double t, const Setpoint& sp, const char* source) {
    latch_.submit(sp, t);
    CommandRecord c;
    c.t = t;
    c.phase = Phase::planning;
    c.source = source;
    c.velocity = sp.kind == Setpoint::Kind::velocity;
    c.value = sp.value;
    c.yaw = sp.yaw;
    log_.add(c);
    bus_.publish("cmd_vel", sp);
  }

  void phase_control(double t) {
    const RigidBodyState nav = nav_state();
    const bool was_stale = latch_.stale();
    active_sp_ = latch_.active(t, nav.position, hold_yaw_);
    if (!was_stale && latch_.stale()) event(t, Phase::control, "command_timeout");
    wrench_ = controller_.compute(nav, state_, active_sp_, dt());
  }

  struct Teleop {
    Vec3 velocity;
    double yaw_rate;
    double until;
  };

  static constexpr double kPlanFailTimeout = 20.0;  // s of continuous planning failure before the mission fails

  SimConfig cfg_;
  WorldModel world_;
  ScenarioScript script_;
  std::uint64_t seed_;
  VehicleParams vp_;
  int tick_hz_ = 400;
  std::uint64_t tick_ = 0;

  RigidBodyState state_;
  BodyWrench wrench_;
  Vec3 accel_ = Vec3::Zero();
  CascadeController controller_;
  CommandLatch latch_;
  Setpoint active_sp_;
  double hold_yaw_ = 0.0;

  VioEstimator estimator_;
  Rng imu_rng_;
  Rng depth_rng_;
  ImuBiasState imu_bias_;
  ImuSample imu_;
  DepthImage depth_;
  PointCloud cloud_;
  std::uint64_t camera_frames_ = 0;

  GlobalOccupancyMap gmap_;
  LocalCylindricalMap local_;
  ProjectedGrid2D projected_;
  std::uint64_t projected_version_ = 0;
  std::optional<EsdfMap2D> esdf_;
  bool esdf_dirty_ = true;

  GlobalPlanner global_planner_;
  LocalPlanner local_planner_;
  CameraIntrinsics render_intr_;
  std::deque<Vec2> goals_;
  std::size_t goals_reached_ = 0;
  std::optional<GlobalPath> path_;
  std::optional<LocalGoal> local_goal_;
  std::optional<Vec3> local_wp_;
  std::optional<double> plan_fail_since_;
  bool need_plan_ = false;
  std::optional<Teleop> teleop_;
  MissionMode mode_ = MissionMode::click_and_fly;

  std::size_t next_event_ = 0;
  std::vector<CoreCommand> pending_;

  TopicBus bus_;
  SimLog log_;
  bool header_written_ = false;
  std::shared_ptr<CloudWriter> clouds_;
  StageTimings timings_;

  Verdict verdict_ = Verdict::running;
  std::string verdict_reason_;
};

}  // namespace navsim
