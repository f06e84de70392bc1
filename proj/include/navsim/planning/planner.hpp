#pragma once

#include "navsim/dynamics.hpp"
#include "navsim/mapping.hpp"
#include "navsim/planning/grid.hpp"
#include "navsim/planning/has.hpp"
#include "navsim/planning/jps.hpp"
#include "navsim/planning/primitive.hpp"

#include <optional>
#include <string>

namespace navsim {

struct PlannerParams {
  double global_hz = 15.0;
  double local_hz = 60.0;
  double inflation_radius = 0.4;        // m
  double cruise_alt = 1.0;              // m
  double lookahead = 1.5;               // m, local goal distance along the Bezier tangent
  double reach_radius = 0.15;           // m, horizontal goal acceptance
  double relocate_radius = 1.0;         // m, blocked-goal relocation
  bool unknown_as_free = true;          // optimistic planning through unobserved space
  double tracking_gain = 1.0;           // 1/s, position correction added to the primitive velocity
  double backup_decel = 1.5;            // m/s^2
  double yaw_scan_rate = 0.8;           // rad/s while the backup is active
  double resync_distance = 0.5;         // m, primitive restarts from the estimate beyond this error
  HasParams has;
  PrimitiveLimits limits;
};

/// Backup maneuver: decelerate to hover at the current position and request a
/// yaw scan so the sensors refresh.
struct BackupPlan {
  MotionPrimitive primitive;
  bool yaw_scan = true;
  std::string reason;
};

inline BackupPlan backup_plan(const Vec3& position, const Vec3& velocity, const std::string& reason, double decel,
                              double start_time = 0.0) {
  return {backup_primitive(position, velocity, decel, start_time), true, reason};
}

/// Outer loop: projected map -> crop/inflate -> JPS -> Bezier local goal.
class GlobalPlanner {
 public:
  explicit GlobalPlanner(PlannerParams p) : p_(p) {}

  struct Output {
    std::optional<GlobalPath> path;
    std::optional<LocalGoal> local_goal;
    std::string error;
  };

  Output plan(const ProjectedGrid2D& grid, const Vec2& vehicle, const Vec2& goal) const {
    Output out;
    const CellState unknown = p_.unknown_as_free ? CellState::free : CellState::occupied;
    const int margin = static_cast<int>(std::ceil(p_.inflation_radius / grid.resolution)) + 5;
    const PlanningGrid g = preprocess_grid(grid, p_.inflation_radius, unknown, {vehicle, goal}, margin);
    try {
      auto sc = g.cell_of(vehicle);
      Vec2 start = vehicle;
      if (!g.passable(sc[0], sc[1])) {
        // The vehicle sits in the inflation margin: start from the nearest free cell.
        const auto nf = nearest_free_cell(g, sc[0], sc[1], 2.0 * p_.inflation_radius / g.resolution + 1.0);
        if (!nf) throw NoPathError("vehicle enclosed by inflated obstacles");
        start = g.center_of((*nf)[0], (*nf)[1]);
      }
      GlobalPath path = jps_plan(g, start, goal, p_.relocate_radius);
      if (!path.goal_relocated && (path.waypoints.back() - goal).norm() < g.resolution) path.waypoints.back() = goal;
      path.waypoints.front() = vehicle;
      out.local_goal = bezier_local_goal(path, vehicle, p_.cruise_alt, p_.lookahead);
      out.path = std::move(path);
    } catch (const NoPathError& e) {
      out.error = e.what();
    }
    return out;
  }

  const PlannerParams& params() const { return p_; }

 private:
  PlannerParams p_;
};

/// Inner loop: heuristic angular search toward the latest local goal, a
/// minimum-acceleration primitive to the found waypoint, backup otherwise.
/// Samples the active primitive into velocity setpoints.
class LocalPlanner {
 public:
  explicit LocalPlanner(PlannerParams p) : p_(p) {}

  enum class Status { idle, tracking, backup };

  struct Step {
    Status status = Status::idle;
    std::optional<Vec3> waypoint;
    std::optional<HasCandidate> candidate;
    std::string backup_reason;
  };

  void reset() {
    active_.reset();
    status_ = Status::idle;
  }

  Status status() const { return status_; }
  const std::optional<MotionPrimitive>& active() const { return active_; }

  /// One local-loop iteration at time t from the estimated state.
  Step update(double t, const Vec3& est_pos, const Vec3& est_vel, const LocalCylindricalMap& local,
              const EsdfMap2D* esdf, const LocalGoal& goal, bool goal_is_final) {
    Step step;
    Vec3 p0 = est_pos;
    Vec3 v0 = CascadeController::clamp_speed(est_vel, p_.limits.max_speed);
    if (active_) {
      const Vec3 pc = active_->position(t);
      if ((pc - est_pos).norm() < p_.resync_distance) {
        p0 = pc;
        v0 = CascadeController::clamp_speed(active_->velocity(t), p_.limits.max_speed);
      }
    }
    const auto found = heuristic_angular_search(local, esdf, p0, goal, p_.has);
    if (!found) {
      if (status_ != Status::backup) {
        active_ = backup_plan(p0, v0, "no feasible waypoint", p_.backup_decel, t).primitive;
        scan_yaw_ = yaw_cmd_;
      }
      status_ = Status::backup;
      step.status = status_;
      step.backup_reason = "no feasible waypoint";
      return step;
    }
    const Vec3 wp = found->waypoint;
    Vec3 v1 = Vec3::Zero();
    const double to_goal = (goal.point - wp).head<2>().norm();
    if (!(goal_is_final && to_goal < 1e-6)) {
      Vec3 dir = goal.point - wp;
      dir.z() = 0.0;
      if (dir.norm() < 1e-6) dir = wp - p0;
      if (dir.norm() > 1e-9) v1 = dir.normalized() * p_.limits.cruise_speed;
    }
    active_ = feasible_primitive(p0, v0, wp, v1, p_.limits, t);
    status_ = Status::tracking;
    step.status = status_;
    step.waypoint = wp;
    step.candidate = found->candidate;
    return step;
  }

  /// Velocity setpoint at time t; nullopt while idle.
  std::optional<Setpoint> command(double t, double dt, const Vec3& est_pos, double current_yaw, double speed_limit) {
    if (!active_) return std::nullopt;
    const Vec3 ref_v = active_->velocity(t);
    const Vec3 ref_p = active_->position(t);
    Vec3 v = ref_v + p_.tracking_gain * (ref_p - est_pos);
    v = CascadeController::clamp_speed(v, speed_limit);
    Setpoint sp;
    sp.kind = Setpoint::Kind::velocity;
    sp.value = v;
    if (status_ == Status::backup) {
      scan_yaw_ = wrap_angle(scan_yaw_ + p_.yaw_scan_rate * dt);
      yaw_cmd_ = scan_yaw_;
    } else if (ref_v.head<2>().norm() > 0.15) {
      yaw_cmd_ = std::atan2(ref_v.y(), ref_v.x());
    } else if (!yaw_initialized_) {
      yaw_cmd_ = current_yaw;
    }
    yaw_initialized_ = true;
    sp.yaw = yaw_cmd_;
    return sp;
  }

  const PlannerParams& params() const { return p_; }

 private:
  PlannerParams p_;
  std::optional<MotionPrimitive> active_;
  Status status_ = Status::idle;
  double yaw_cmd_ = 0.0;
  double scan_yaw_ = 0.0;
  bool yaw_initialized_ = false;
};

}  // namespace navsim
