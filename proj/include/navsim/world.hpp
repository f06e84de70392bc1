#pragma once

#include "navsim/common.hpp"
#include "navsim/state.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace navsim {

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }

  /// Euclidean distance from a point to the box (0 inside).
  double distance(const Vec3& p) const {
    const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(Vec3::Zero());
    return d.norm();
  }

  bool operator==(const Box&) const = default;
};

struct WorldBounds {
  double x_min = -10.0;
  double x_max = 10.0;
  double y_min = -10.0;
  double y_max = 10.0;

  bool contains_xy(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
  bool operator==(const WorldBounds&) const = default;
};

/// Static obstacle world: axis-aligned boxes over a ground plane at z = 0.
/// Immutable once loaded, so it can be shared freely between readers.
class WorldModel {
 public:
  WorldModel() = default;
  WorldModel(WorldBounds bounds, std::vector<Box> obstacles) : bounds_(bounds), obstacles_(std::move(obstacles)) {
    validate();
  }

  const WorldBounds& bounds() const { return bounds_; }
  const std::vector<Box>& obstacles() const { return obstacles_; }

  bool operator==(const WorldModel&) const = default;

  bool inside_obstacle(const Vec3& p) const {
    return std::any_of(obstacles_.begin(), obstacles_.end(), [&](const Box& b) { return b.contains(p); });
  }

  /// Distance from a point to the nearest obstacle box (ground excluded).
  double clearance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : obstacles_) best = std::min(best, b.distance(p));
    return best;
  }

  /// Horizontal distance from (x, y) to the nearest obstacle footprint.
  double footprint_clearance(double x, double y) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : obstacles_) {
      const double dx = std::max({b.min.x() - x, 0.0, x - b.max.x()});
      const double dy = std::max({b.min.y() - y, 0.0, y - b.max.y()});
      best = std::min(best, std::hypot(dx, dy));
    }
    return best;
  }

 private:
  void validate() const {
    if (!(bounds_.x_min < bounds_.x_max) || !(bounds_.y_min < bounds_.y_max))
      throw DomainError("world bounds must satisfy min < max");
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const Box& b = obstacles_[i];
      if (!b.min.allFinite() || !b.max.allFinite()) throw GeometryError("non-finite corner", i);
      for (int a = 0; a < 3; ++a)
        if (!(b.min[a] < b.max[a]))
          throw GeometryError("min must be < max on axis " + std::string(1, "xyz"[a]), i);
      if (b.max.x() < bounds_.x_min || b.min.x() > bounds_.x_max || b.max.y() < bounds_.y_min ||
          b.min.y() > bounds_.y_max)
        throw GeometryError("box lies outside world bounds", i);
    }
  }

  WorldBounds bounds_;
  std::vector<Box> obstacles_;
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline double require_number(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ParseError("missing key", 0, path + "." + key);
  const auto& v = j.at(key);
  if (!v.is_number()) throw ParseError("expected a number in meters", 0, path + "." + key);
  return v.get<double>();
}

inline Vec3 require_vec3(const nlohmann::json& j, const char* key, const std::string& path) {
  const std::string field = path + "." + key;
  if (!j.is_object() || !j.contains(key)) throw ParseError("missing key", 0, field);
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw ParseError("expected [x, y, z]", 0, field);
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ParseError("expected a number in meters", 0, field + "[" + std::to_string(i) + "]");
    out[i] = v[i].get<double>();
  }
  return out;
}

/// Parses JSON, translating syntax errors to a line-numbered ParseError.
inline nlohmann::json parse_document(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("syntax error: ") + e.what(), line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), "");
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Parses a world descriptor:
///   {"bounds": {"x_min":..,"x_max":..,"y_min":..,"y_max":..},
///    "obstacles": [{"min":[x,y,z], "max":[x,y,z]}, ...]}
/// All lengths in meters. An optional "name" string per obstacle is ignored.
inline WorldModel load_world(const std::string& text) {
  const nlohmann::json doc = detail::parse_document(text);
  if (!doc.is_object()) throw ParseError("world descriptor must be an object", 1, "");
  if (!doc.contains("bounds")) throw ParseError("missing key", 0, "bounds");
  const auto& jb = doc.at("bounds");
  WorldBounds bounds{detail::require_number(jb, "x_min", "bounds"), detail::require_number(jb, "x_max", "bounds"),
                     detail::require_number(jb, "y_min", "bounds"), detail::require_number(jb, "y_max", "bounds")};
  std::vector<Box> boxes;
  if (doc.contains("obstacles")) {
    const auto& jo = doc.at("obstacles");
    if (!jo.is_array()) throw ParseError("expected an array", 0, "obstacles");
    for (std::size_t i = 0; i < jo.size(); ++i) {
      const std::string path = "obstacles[" + std::to_string(i) + "]";
      boxes.push_back({detail::require_vec3(jo[i], "min", path), detail::require_vec3(jo[i], "max", path)});
    }
  }
  return WorldModel(bounds, std::move(boxes));
}

/// Resolves `worlds/paper_world` style references: tries the path as given,
/// then with a `.json` suffix.
inline std::filesystem::path resolve_world_path(const std::filesystem::path& ref) {
  if (std::filesystem::exists(ref)) return ref;
  auto with_ext = ref;
  with_ext += ".json";
  if (std::filesystem::exists(with_ext)) return with_ext;
  throw Error("world descriptor not found: " + ref.string());
}

inline WorldModel load_world_file(const std::filesystem::path& ref) {
  return load_world(detail::read_text_file(resolve_world_path(ref)));
}

/// Smallest non-negative distance along a unit ray to any box face or the
/// ground plane, or nullopt when nothing lies within max_range. A ray that
/// starts inside a box (or below ground) reports 0.
inline std::optional<double> ray_hit(const WorldModel& world, const Vec3& origin, const Vec3& dir, double max_range) {
  double best = std::numeric_limits<double>::infinity();
  if (origin.z() <= 0.0) {
    best = 0.0;
  } else if (dir.z() < 0.0) {
    best = -origin.z() / dir.z();
  }
  for (const auto& b : world.obstacles()) {
    double t0 = 0.0;
    double t1 = best;
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (dir[a] == 0.0) {
        if (origin[a] < b.min[a] || origin[a] > b.max[a]) miss = true;
        continue;
      }
      const double inv = 1.0 / dir[a];
      double tn = (b.min[a] - origin[a]) * inv;
      double tf = (b.max[a] - origin[a]) * inv;
      if (tn > tf) std::swap(tn, tf);
      t0 = std::max(t0, tn);
      t1 = std::min(t1, tf);
      if (t0 > t1) miss = true;
    }
    if (!miss && t0 < best) best = t0;
  }
  if (best <= max_range) return best;
  return std::nullopt;
}

/// Pose of the IMU link in the inertial frame: body pose composed with the
/// body -> IMU mounting transform.
inline Pose ground_truth_pose(const RigidBodyState& state, const Pose& body_to_imu = Pose::identity()) {
  return state.pose().compose(body_to_imu);
}

}  // namespace navsim
