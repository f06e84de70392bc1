#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace navsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

inline double yaw_of(const Quat& q) {
  const Mat3 r = q.toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

inline Quat quat_from_yaw(double yaw) { return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())); }

/// Rigid transform: position in the parent frame plus rotation child -> parent.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return orientation * p + position; }

  Pose compose(const Pose& child) const {
    Pose out;
    out.position = apply(child.position);
    out.orientation = (orientation * child.orientation).normalized();
    return out;
  }

  Pose inverse() const {
    Pose out;
    out.orientation = orientation.conjugate();
    out.position = -(out.orientation * position);
    return out;
  }

  /// Builds a pose from a 4x4 homogeneous matrix (rotation part assumed orthonormal).
  static Pose from_matrix(const Eigen::Matrix4d& t) {
    Pose out;
    out.orientation = Quat(Mat3(t.block<3, 3>(0, 0))).normalized();
    out.position = t.block<3, 1>(0, 3);
    return out;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = orientation.toRotationMatrix();
    m.block<3, 1>(0, 3) = position;
    return m;
  }
};

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `line` is 1-based, 0 when the problem is not tied
/// to a source position (schema errors carry the field path instead).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, std::string field)
      : Error(what + (line > 0 ? " at line " + std::to_string(line) : std::string()) +
              (field.empty() ? std::string() : " in field '" + field + "'")),
        line_(line),
        field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

class GeometryError : public Error {
 public:
  GeometryError(const std::string& what, std::size_t obstacle)
      : Error("obstacle " + std::to_string(obstacle) + ": " + what), obstacle_(obstacle) {}
  std::size_t obstacle() const { return obstacle_; }

 private:
  std::size_t obstacle_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic randomness

/// splitmix64 finalizer; used to derive independent stream seeds from one root seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random source. The engine is fully specified by the standard; the
/// normal deviate is produced here (Box-Muller) rather than by
/// std::normal_distribution, whose algorithm varies between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix_seed(seed)) {}

  /// Independent sub-stream for a named consumer.
  static Rng stream(std::uint64_t root_seed, std::uint64_t stream_id) {
    return Rng(root_seed ^ mix_seed(stream_id + 0x5bd1e995ULL));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next_u64() { return engine_(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double sigma) { return sigma == 0.0 ? 0.0 : sigma * normal(); }

  Vec3 normal3(double sigma) {
    const double x = normal(sigma);
    const double y = normal(sigma);
    const double z = normal(sigma);
    return {x, y, z};
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace navsim
