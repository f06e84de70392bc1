#pragma once

#include "navsim/common.hpp"

#include <algorithm>
#include <cmath>

namespace navsim {

/// Per-axis cubic p(t) = c0 + c1 t + c2 t^2 + c3 t^3 over [0, duration],
/// anchored at `start_time` on the simulation clock.
struct MotionPrimitive {
  Eigen::Matrix<double, 3, 4> coeffs = Eigen::Matrix<double, 3, 4>::Zero();
  double duration = 0.0;
  double start_time = 0.0;

  double local_time(double t) const { return std::clamp(t - start_time, 0.0, duration); }

  Vec3 position_at(double tau) const {
    return coeffs.col(0) + tau * (coeffs.col(1) + tau * (coeffs.col(2) + tau * coeffs.col(3)));
  }
  Vec3 velocity_at(double tau) const {
    return coeffs.col(1) + tau * (2.0 * coeffs.col(2) + 3.0 * tau * coeffs.col(3));
  }
  Vec3 acceleration_at(double tau) const { return 2.0 * coeffs.col(2) + 6.0 * tau * coeffs.col(3); }

  /// Evaluations on the simulation clock; clamp to the segment ends.
  Vec3 position(double t) const { return position_at(local_time(t)); }
  Vec3 velocity(double t) const {
    const double tau = t - start_time;
    if (tau >= duration) return velocity_at(duration);
    return velocity_at(std::max(tau, 0.0));
  }

  Vec3 end_position() const { return position_at(duration); }
  Vec3 end_velocity() const { return velocity_at(duration); }

  /// Integral of |a(t)|^2 over [0, duration].
  double cost() const {
    const double T = duration;
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double c2 = coeffs(i, 2);
      const double c3 = coeffs(i, 3);
      total += 4.0 * c2 * c2 * T + 12.0 * c2 * c3 * T * T + 12.0 * c3 * c3 * T * T * T;
    }
    return total;
  }

  /// Largest speed over the segment, sampled every `step` seconds (ends included).
  double max_speed(double step = 1e-3) const {
    double best = 0.0;
    const int n = std::max(1, static_cast<int>(std::ceil(duration / step)));
    for (int k = 0; k <= n; ++k) best = std::max(best, velocity_at(duration * k / n).norm());
    return best;
  }
};

class DegenerateDurationError : public Error {
 public:
  using Error::Error;
};

/// Minimum-acceleration segment: the cubic that minimizes the integral of
/// |a|^2 subject to p(0), v(0), p(T), v(T). Each axis solves independently.
inline MotionPrimitive min_acc_primitive(const Vec3& p0, const Vec3& v0, const Vec3& p1, const Vec3& v1, double T,
                                         double start_time = 0.0, double t_min = 1e-3) {
  if (!(T >= t_min) || !std::isfinite(T)) throw DegenerateDurationError("min_acc_primitive: duration below T_min");
  MotionPrimitive m;
  m.duration = T;
  m.start_time = start_time;
  const Vec3 d = p1 - p0;
  m.coeffs.col(0) = p0;
  m.coeffs.col(1) = v0;
  m.coeffs.col(2) = (3.0 * d - (2.0 * v0 + v1) * T) / (T * T);
  m.coeffs.col(3) = (-2.0 * d + (v0 + v1) * T) / (T * T * T);
  return m;
}

struct PrimitiveLimits {
  double cruise_speed = 0.6;  // m/s, sets the nominal duration
  double max_speed = 0.8;     // m/s, primitives are stretched until they respect it
  double t_min = 0.3;         // s
  double t_max = 8.0;         // s
};

/// Nominal duration distance / cruise_speed clamped to [t_min, t_max], then
/// stretched by 10% steps until the sampled peak speed is within max_speed.
inline MotionPrimitive feasible_primitive(const Vec3& p0, const Vec3& v0, const Vec3& p1, const Vec3& v1,
                                          const PrimitiveLimits& lim, double start_time = 0.0) {
  const double dist = (p1 - p0).norm();
  double T = std::clamp(dist / lim.cruise_speed, lim.t_min, lim.t_max);
  MotionPrimitive m = min_acc_primitive(p0, v0, p1, v1, T, start_time, lim.t_min);
  for (int i = 0; i < 60 && m.max_speed() > lim.max_speed; ++i) {
    T *= 1.1;
    m = min_acc_primitive(p0, v0, p1, v1, T, start_time, lim.t_min);
  }
  return m;
}

/// Decelerate-to-hover segment: velocity decays linearly to zero over
/// T = max(|v| / decel, t_min), which the cubic reproduces exactly with
/// p(T) = p0 + v0 T / 2.
inline MotionPrimitive backup_primitive(const Vec3& p0, const Vec3& v0, double decel, double start_time = 0.0,
                                        double t_min = 0.3) {
  const double T = std::max(v0.norm() / decel, t_min);
  return min_acc_primitive(p0, v0, p0 + 0.5 * T * v0, Vec3::Zero(), T, start_time, t_min);
}

}  // namespace navsim
