#pragma once

#include "navsim/mapping.hpp"
#include "navsim/planning/jps.hpp"
#include "navsim/planning/primitive.hpp"

#include <optional>
#include <vector>

namespace navsim {

struct HasParams {
  double step_deg = 10.0;         // angular increment
  double max_offset_deg = 80.0;   // largest horizontal offset tried
  double step_length = 1.0;       // m
  double tier_deg = 15.0;         // vertical tier, tried after all horizontal candidates
  double corridor_radius = 0.4;   // m, swept radius checked against the local map
  double safe_radius = 0.4;       // m, minimum ESDF clearance along the step
  double sample_spacing = 0.1;    // m, along the step
  double z_min = 0.5;             // m, allowed waypoint altitude
  double z_max = 2.5;
};

struct HasCandidate {
  double offset = 0.0;  // rad, positive = left (counter-clockwise)
  double tier = 0.0;    // rad, positive = climb
};

/// Candidate order: horizontal offsets 0, +d, -d, +2d, -2d, ... up to the
/// maximum, then the same sweep on the +tier and -tier levels.
inline std::vector<HasCandidate> has_candidates(const HasParams& p) {
  std::vector<HasCandidate> out;
  const double d = deg2rad(p.step_deg);
  const int n = static_cast<int>(std::floor(p.max_offset_deg / p.step_deg + 1e-9));
  std::vector<double> tiers{0.0};
  if (p.tier_deg > 0.0) {
    tiers.push_back(deg2rad(p.tier_deg));
    tiers.push_back(-deg2rad(p.tier_deg));
  }
  for (double tier : tiers) {
    out.push_back({0.0, tier});
    for (int k = 1; k <= n; ++k) {
      out.push_back({k * d, tier});
      out.push_back({-k * d, tier});
    }
  }
  return out;
}

namespace detail {

/// Occupied local-map cell summarized as a vertical cylinder in the vehicle frame.
struct OccupiedCell {
  Vec2 center;
  double radius;
  double z_lo;
  double z_hi;
};

inline std::vector<OccupiedCell> occupied_cells(const LocalCylindricalMap& m) {
  std::vector<OccupiedCell> out;
  const auto& p = m.params();
  const double da = m.azimuth_step();
  const double dr = m.ring_step();
  const double dz = m.z_step();
  for (int z = 0; z < p.n_z; ++z)
    for (int r = 0; r < p.n_ring; ++r)
      for (int a = 0; a < p.n_azimuth; ++a) {
        if (m.count(a, r, z) == 0) continue;
        const double th = -kPi + (a + 0.5) * da;
        const double rc = (r + 0.5) * dr;
        OccupiedCell c;
        c.center = Vec2(rc * std::cos(th), rc * std::sin(th));
        // Covers the annular sector: half the ring width and half the outer arc.
        c.radius = std::hypot(0.5 * dr, 0.5 * (r + 1) * dr * da);
        c.z_lo = p.z_min + z * dz;
        c.z_hi = c.z_lo + dz;
        out.push_back(c);
      }
  return out;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double l2 = ab.squaredNorm();
  const double t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace detail

struct HasResult {
  Vec3 waypoint = Vec3::Zero();
  HasCandidate candidate;
  std::size_t evaluated = 0;
};

/// True when the straight step start -> end is clear: no occupied local-map
/// cell within the corridor radius, and ESDF clearance of at least
/// safe_radius at every sample. Obstacles the vehicle is already closer to
/// than those radii only block steps that approach them further.
inline bool has_step_clear(const std::vector<detail::OccupiedCell>& cells, const LocalCylindricalMap& local,
                           const EsdfMap2D* esdf, const Vec3& start, const Vec3& end, const HasParams& p) {
  const Vec3 a3 = local.to_local(start);
  const Vec3 b3 = local.to_local(end);
  const Vec2 a = a3.head<2>();
  const Vec2 b = b3.head<2>();
  const double z_lo = std::min(a3.z(), b3.z()) - p.corridor_radius;
  const double z_hi = std::max(a3.z(), b3.z()) + p.corridor_radius;
  for (const auto& c : cells) {
    if (c.z_hi < z_lo || c.z_lo > z_hi) continue;
    const double d_seg = detail::point_segment_distance(c.center, a, b) - c.radius;
    if (d_seg >= p.corridor_radius) continue;
    const double d_now = (c.center - a).norm() - c.radius;
    if (d_seg < d_now - 1e-9 || d_now >= p.corridor_radius) return false;
  }
  if (esdf) {
    const Vec2 s2 = start.head<2>();
    if (!esdf->contains(s2)) return false;
    const double d_start = query_distance_gradient(*esdf, s2).distance;
    const double required = std::min(p.safe_radius, d_start);
    const double len = (end - start).head<2>().norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / p.sample_spacing)));
    for (int k = 1; k <= n; ++k) {
      const Vec2 q = s2 + (end - start).head<2>() * (static_cast<double>(k) / n);
      if (!esdf->contains(q)) return false;
      if (query_distance_gradient(*esdf, q).distance < required - 1e-9) return false;
    }
  }
  return true;
}

/// Heuristic angular search: tries candidate headings around the bearing to
/// the local goal in increasing |offset| order and returns the first clear
/// waypoint one step away (or the goal itself when closer than a step).
inline std::optional<HasResult> heuristic_angular_search(const LocalCylindricalMap& local, const EsdfMap2D* esdf,
                                                         const Vec3& position, const LocalGoal& goal,
                                                         const HasParams& p = {}) {
  const auto cells = detail::occupied_cells(local);
  const Vec3 to_goal = goal.point - position;
  const double horiz = to_goal.head<2>().norm();
  const double bearing = horiz > 1e-9 ? std::atan2(to_goal.y(), to_goal.x()) : goal.heading;
  const double step = std::min(p.step_length, std::max(horiz, 0.05));
  HasResult res;
  for (const auto& c : has_candidates(p)) {
    ++res.evaluated;
    const double heading = bearing + c.offset;
    Vec3 wp;
    if (c.offset == 0.0 && c.tier == 0.0) {
      if (horiz <= p.step_length) {
        wp = Vec3(goal.point.x(), goal.point.y(), goal.point.z());
      } else {
        wp = position + step * Vec3(std::cos(heading), std::sin(heading), 0.0);
        wp.z() = position.z() + (goal.point.z() - position.z()) * std::min(1.0, step / std::max(horiz, 1e-9));
      }
    } else {
      wp = position + step * Vec3(std::cos(c.tier) * std::cos(heading), std::cos(c.tier) * std::sin(heading),
                                  std::sin(c.tier));
    }
    wp.z() = std::clamp(wp.z(), p.z_min, p.z_max);
    if (has_step_clear(cells, local, esdf, position, wp, p)) {
      res.waypoint = wp;
      res.candidate = c;
      return res;
    }
  }
  return std::nullopt;
}

}  // namespace navsim
