#pragma once

#include "navsim/common.hpp"
#include "navsim/state.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

namespace navsim {

struct BodyWrench {
  Vec3 force = Vec3::Zero();   // body frame, N
  Vec3 moment = Vec3::Zero();  // body frame, N*m

  bool finite() const { return force.allFinite() && moment.allFinite(); }
};

class IntegrationDivergence : public Error {
 public:
  explicit IntegrationDivergence(const RigidBodyState& s) : Error(describe(s)), state_(s) {}
  const RigidBodyState& state() const { return state_; }

 private:
  static std::string describe(const RigidBodyState& s) {
    std::ostringstream os;
    os << "integration diverged: p=(" << s.position.transpose() << ") v=(" << s.velocity.transpose() << ") q=("
       << s.attitude.coeffs().transpose() << ") w=(" << s.body_rate.transpose() << ")";
    return os.str();
  }
  RigidBodyState state_;
};

struct VehicleParams {
  double mass = 1.5;                          // kg
  Vec3 inertia = Vec3(0.029, 0.029, 0.055);   // kg*m^2, principal axes
  double gravity = 9.81;                      // m/s^2
};

namespace detail {

struct StateDerivative {
  Vec3 dpos;
  Vec3 dvel;
  Eigen::Vector4d dquat;  // (w, x, y, z)
  Vec3 domega;
};

inline Eigen::Vector4d quat_wxyz(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }
inline Quat quat_from_wxyz(const Eigen::Vector4d& v) { return Quat(v[0], v[1], v[2], v[3]); }

inline StateDerivative derivative(const Vec3& vel, const Eigen::Vector4d& qv, const Vec3& omega,
                                  const BodyWrench& wrench, const VehicleParams& vp) {
  const Quat q = quat_from_wxyz(qv);
  StateDerivative d;
  d.dpos = vel;
  // m dv/dt = R F_B + m g_vec
  d.dvel = (q * wrench.force) / vp.mass - Vec3(0.0, 0.0, vp.gravity);
  // dq/dt = 1/2 q (x) (0, w)
  const Quat wq(0.0, omega.x(), omega.y(), omega.z());
  d.dquat = 0.5 * quat_wxyz(q * wq);
  // I dw/dt = -w x (I w) + M
  const Vec3 iw = vp.inertia.cwiseProduct(omega);
  d.domega = (wrench.moment - omega.cross(iw)).cwiseQuotient(vp.inertia);
  return d;
}

}  // namespace detail

/// Gyroscopic torque w x (I w) for the diagonal inertia.
inline Vec3 gyroscopic_torque(const Vec3& omega, const Vec3& inertia) {
  return omega.cross(inertia.cwiseProduct(omega));
}

/// One classical RK4 step of the rigid-body equations with the wrench held
/// constant over the step; attitude renormalized afterwards.
inline RigidBodyState step_dynamics(const RigidBodyState& s, const BodyWrench& wrench, const VehicleParams& vp,
                                    double dt) {
  if (!(dt > 0.0 && dt <= 0.01)) throw DomainError("step_dynamics: dt must lie in (0, 0.01]");
  using detail::derivative;
  const Vec3 p0 = s.position;
  const Vec3 v0 = s.velocity;
  const Eigen::Vector4d q0 = detail::quat_wxyz(s.attitude);
  const Vec3 w0 = s.body_rate;

  const auto k1 = derivative(v0, q0, w0, wrench, vp);
  const auto k2 = derivative(v0 + 0.5 * dt * k1.dvel, q0 + 0.5 * dt * k1.dquat, w0 + 0.5 * dt * k1.domega, wrench, vp);
  const auto k3 = derivative(v0 + 0.5 * dt * k2.dvel, q0 + 0.5 * dt * k2.dquat, w0 + 0.5 * dt * k2.domega, wrench, vp);
  const auto k4 = derivative(v0 + dt * k3.dvel, q0 + dt * k3.dquat, w0 + dt * k3.domega, wrench, vp);

  RigidBodyState out;
  out.position = p0 + dt / 6.0 * (k1.dpos + 2.0 * k2.dpos + 2.0 * k3.dpos + k4.dpos);
  out.velocity = v0 + dt / 6.0 * (k1.dvel + 2.0 * k2.dvel + 2.0 * k3.dvel + k4.dvel);
  const Eigen::Vector4d q1 = q0 + dt / 6.0 * (k1.dquat + 2.0 * k2.dquat + 2.0 * k3.dquat + k4.dquat);
  out.attitude = detail::quat_from_wxyz(q1).normalized();
  out.body_rate = w0 + dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  if (!out.finite()) throw IntegrationDivergence(out);
  return out;
}

/// Inertial-frame acceleration implied by a wrench at a given attitude.
inline Vec3 linear_acceleration(const Quat& attitude, const BodyWrench& wrench, const VehicleParams& vp) {
  return (attitude * wrench.force) / vp.mass - Vec3(0.0, 0.0, vp.gravity);
}

inline double mechanical_energy(const RigidBodyState& s, const VehicleParams& vp) {
  const double kinetic = 0.5 * vp.mass * s.velocity.squaredNorm() +
                         0.5 * s.body_rate.dot(vp.inertia.cwiseProduct(s.body_rate));
  return kinetic + vp.mass * vp.gravity * s.position.z();
}

// ---------------------------------------------------------------------------
// Flight controller

struct Setpoint {
  enum class Kind { position, velocity };
  Kind kind = Kind::position;
  Vec3 value = Vec3::Zero();
  double yaw = 0.0;
};

/// Fixed gains for the cascade. Tuned against the 2 m step-response check in
/// tests/dynamics_test.cpp; there is no published reference for them.
struct ControllerGains {
  double pos_p = 1.0;
  double vel_p = 3.0;
  double vel_i = 0.4;
  double vel_d = 0.0;
  double vel_i_limit = 2.0;  // m/s^2 contribution
  double vel_i_zone = 0.2;   // m/s; integrate only near the setpoint
  double att_p = 8.0;
  double rate_p = 12.0;
  double rate_d = 0.0;
  double yaw_rate_limit = 1.5;  // rad/s
  double yaw_weight = 0.4;      // yaw share of the attitude error; tilt is corrected first
  double max_tilt = deg2rad(35.0);
};

struct ControllerSaturation {
  bool speed = false;
  bool tilt = false;
  bool thrust = false;
};

/// Position P -> velocity PID -> thrust vector -> attitude P -> rate P.
/// Holds the velocity-loop integrator; everything else is a function of the inputs.
class CascadeController {
 public:
  CascadeController(VehicleParams vehicle, ControllerGains gains, double speed_limit)
      : vp_(vehicle), gains_(gains), speed_limit_(speed_limit) {}

  void reset() {
    integral_ = Vec3::Zero();
    last_vel_error_.reset();
  }

  const ControllerSaturation& last_saturation() const { return sat_; }
  const Vec3& last_velocity_setpoint() const { return vel_sp_; }
  double speed_limit() const { return speed_limit_; }
  const ControllerGains& gains() const { return gains_; }

  /// `nav` supplies position/velocity (estimator output); `att` supplies
  /// attitude and body rate (attitude estimation is assumed ideal).
  BodyWrench compute(const RigidBodyState& nav, const RigidBodyState& att, const Setpoint& sp, double dt) {
    sat_ = {};
    Vec3 vel_sp = sp.kind == Setpoint::Kind::position ? Vec3(gains_.pos_p * (sp.value - nav.position)) : sp.value;
    vel_sp = clamp_speed(vel_sp, speed_limit_, &sat_.speed);
    vel_sp_ = vel_sp;

    const Vec3 err = vel_sp - nav.velocity;
    if (err.norm() < gains_.vel_i_zone) integral_ += gains_.vel_i * err * dt;
    const double lim = gains_.vel_i_limit;
    integral_ = integral_.cwiseMax(Vec3::Constant(-lim)).cwiseMin(Vec3::Constant(lim));
    Vec3 derr = Vec3::Zero();
    if (last_vel_error_ && dt > 0.0) derr = (err - *last_vel_error_) / dt;
    last_vel_error_ = err;
    const Vec3 acc_des = gains_.vel_p * err + integral_ + gains_.vel_d * derr;

    Vec3 thrust_vec = vp_.mass * (acc_des + Vec3(0.0, 0.0, vp_.gravity));
    const double hover = vp_.mass * vp_.gravity;
    if (thrust_vec.z() < 1e-3 * hover) {
      thrust_vec.z() = 1e-3 * hover;
      sat_.tilt = true;
    }
    const double horiz = thrust_vec.head<2>().norm();
    const double max_horiz = thrust_vec.z() * std::tan(gains_.max_tilt);
    if (horiz > max_horiz) {
      thrust_vec.head<2>() *= max_horiz / horiz;
      sat_.tilt = true;
    }

    const Vec3 z_des = thrust_vec.normalized();
    const Quat q_des = attitude_from_z_yaw(z_des, sp.yaw);
    const Mat3 r = att.attitude.toRotationMatrix();
    double thrust = thrust_vec.dot(r.col(2));
    if (thrust < 0.0 || thrust > 2.0 * hover) sat_.thrust = true;
    thrust = std::clamp(thrust, 0.0, 2.0 * hover);

    // Reduced attitude: the tilt-only target q_red rotates the current body z
    // onto z_des; the remaining yaw about z_des is applied scaled by yaw_weight
    // so a large heading change cannot steal authority from the tilt.
    const Quat q_red = Quat::FromTwoVectors(r.col(2), z_des) * att.attitude;
    Quat q_mix = q_red.conjugate() * q_des;
    if (q_mix.w() < 0.0) q_mix.coeffs() *= -1.0;
    const double half_yaw = std::atan2(q_mix.z(), q_mix.w()) * gains_.yaw_weight;
    const Quat q_target = q_red * Quat(std::cos(half_yaw), 0.0, 0.0, std::sin(half_yaw));
    Quat q_err = att.attitude.conjugate() * q_target;
    if (q_err.w() < 0.0) q_err.coeffs() *= -1.0;
    Vec3 rate_sp = 2.0 * gains_.att_p * q_err.vec();
    rate_sp.z() = std::clamp(rate_sp.z(), -gains_.yaw_rate_limit, gains_.yaw_rate_limit);

    const Vec3 rate_err = rate_sp - att.body_rate;
    const Vec3 ang_acc = gains_.rate_p * rate_err;
    BodyWrench w;
    w.force = Vec3(0.0, 0.0, thrust);
    w.moment = vp_.inertia.cwiseProduct(ang_acc) + gyroscopic_torque(att.body_rate, vp_.inertia);
    if (!w.finite()) {
      w.force = Vec3(0.0, 0.0, hover);
      w.moment = Vec3::Zero();
    }
    return w;
  }

  static Vec3 clamp_speed(const Vec3& v, double limit, bool* clamped = nullptr) {
    const double n = v.norm();
    if (n > limit) {
      if (clamped) *clamped = true;
      return v * (limit / n);
    }
    return v;
  }

  /// Attitude whose body z axis is `z_des` with heading `yaw`.
  static Quat attitude_from_z_yaw(const Vec3& z_des, double yaw) {
    const Vec3 x_c(std::cos(yaw), std::sin(yaw), 0.0);
    Vec3 y_b = z_des.cross(x_c);
    if (y_b.norm() < 1e-9) y_b = Vec3::UnitY();
    y_b.normalize();
    const Vec3 x_b = y_b.cross(z_des);
    Mat3 r;
    r.col(0) = x_b;
    r.col(1) = y_b;
    r.col(2) = z_des;
    return Quat(r).normalized();
  }

 private:
  VehicleParams vp_;
  ControllerGains gains_;
  double speed_limit_;
  Vec3 integral_ = Vec3::Zero();
  std::optional<Vec3> last_vel_error_;
  Vec3 vel_sp_ = Vec3::Zero();
  ControllerSaturation sat_;
};

/// Stateless convenience form: a fresh controller (zero integrator) evaluated once.
inline BodyWrench cascade_control(const RigidBodyState& state, const Setpoint& sp, const VehicleParams& vp,
                                  double speed_limit, double dt, const ControllerGains& gains = {}) {
  CascadeController c(vp, gains, speed_limit);
  return c.compute(state, state, sp, dt);
}

/// Latest-wins setpoint latch with a hold-position failsafe: when no command
/// arrives for `timeout` seconds in autonomous operation, it falls back to a
/// position setpoint at the position held when the stream went stale.
class CommandLatch {
 public:
  explicit CommandLatch(double timeout = 0.5) : timeout_(timeout) {}

  void initialize(const Vec3& hold_position, double hold_yaw) {
    hold_ = Setpoint{Setpoint::Kind::position, hold_position, hold_yaw};
    latched_.reset();
    stale_ = true;
  }

  void submit(const Setpoint& sp, double t) {
    latched_ = sp;
    last_time_ = t;
    stale_ = false;
  }

  /// Active setpoint at time t given the current position (for the failsafe).
  Setpoint active(double t, const Vec3& current_position, double current_yaw) {
    if (latched_ && !stale_ && t - last_time_ > timeout_) {
      stale_ = true;
      hold_ = Setpoint{Setpoint::Kind::position, current_position, current_yaw};
    }
    if (!latched_ || stale_) return hold_;
    return *latched_;
  }

  bool stale() const { return stale_; }
  double timeout() const { return timeout_; }

 private:
  double timeout_;
  std::optional<Setpoint> latched_;
  Setpoint hold_;
  double last_time_ = 0.0;
  bool stale_ = true;
};

}  // namespace navsim
