#pragma once

#include "navsim/planning/grid.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

namespace navsim {

class NoPathError : public Error {
 public:
  using Error::Error;
};

struct GlobalPath {
  std::vector<Vec2> waypoints;               // m, cell centers (first = start)
  std::vector<std::array<int, 2>> cells;     // jump points
  double length = 0.0;                       // m
  bool goal_relocated = false;
  Vec2 goal = Vec2::Zero();                  // goal actually planned to
};

/// Octile distance in cells.
inline double octile(int dx, int dy) {
  dx = std::abs(dx);
  dy = std::abs(dy);
  return std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy);
}

/// 8-connected moves where a diagonal step needs both adjacent orthogonal
/// cells free (no corner cutting).
inline bool can_move(const PlanningGrid& g, int x, int y, int dx, int dy) {
  if (!g.passable(x + dx, y + dy)) return false;
  if (dx != 0 && dy != 0) return g.passable(x + dx, y) && g.passable(x, y + dy);
  return true;
}

namespace detail {

class JumpPointSearch {
 public:
  JumpPointSearch(const PlanningGrid& g, std::array<int, 2> goal) : g_(g), gx_(goal[0]), gy_(goal[1]) {}

  /// Jump from (x, y) in direction (dx, dy); returns the jump point or nullopt.
  std::optional<std::array<int, 2>> jump(int x, int y, int dx, int dy) const {
    while (true) {
      if (!can_move(g_, x, y, dx, dy)) return std::nullopt;
      x += dx;
      y += dy;
      if (x == gx_ && y == gy_) return std::array<int, 2>{x, y};
      if (dx != 0 && dy != 0) {
        if (jump(x, y, dx, 0) || jump(x, y, 0, dy)) return std::array<int, 2>{x, y};
      } else if (dx != 0) {
        if ((g_.passable(x, y - 1) && !g_.passable(x - dx, y - 1)) ||
            (g_.passable(x, y + 1) && !g_.passable(x - dx, y + 1)))
          return std::array<int, 2>{x, y};
      } else {
        if ((g_.passable(x - 1, y) && !g_.passable(x - 1, y - dy)) ||
            (g_.passable(x + 1, y) && !g_.passable(x + 1, y - dy)))
          return std::array<int, 2>{x, y};
      }
    }
  }

  /// Pruned successor directions for a node reached from `parent`.
  void directions(int x, int y, std::optional<std::array<int, 2>> parent, std::vector<std::array<int, 2>>& out) const {
    out.clear();
    if (!parent) {
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && can_move(g_, x, y, dx, dy)) out.push_back({dx, dy});
      return;
    }
    const int dx = (x > (*parent)[0]) - (x < (*parent)[0]);
    const int dy = (y > (*parent)[1]) - (y < (*parent)[1]);
    if (dx != 0 && dy != 0) {
      if (g_.passable(x, y + dy)) out.push_back({0, dy});
      if (g_.passable(x + dx, y)) out.push_back({dx, 0});
      if (g_.passable(x, y + dy) && g_.passable(x + dx, y)) out.push_back({dx, dy});
    } else if (dx != 0) {
      const bool next = g_.passable(x + dx, y);
      const bool up = g_.passable(x, y + 1);
      const bool down = g_.passable(x, y - 1);
      if (next) {
        out.push_back({dx, 0});
        if (up) out.push_back({dx, 1});
        if (down) out.push_back({dx, -1});
      }
      if (up) out.push_back({0, 1});
      if (down) out.push_back({0, -1});
    } else {
      const bool next = g_.passable(x, y + dy);
      const bool right = g_.passable(x + 1, y);
      const bool left = g_.passable(x - 1, y);
      if (next) {
        out.push_back({0, dy});
        if (right) out.push_back({1, dy});
        if (left) out.push_back({-1, dy});
      }
      if (right) out.push_back({1, 0});
      if (left) out.push_back({-1, 0});
    }
  }

 private:
  const PlanningGrid& g_;
  int gx_, gy_;
};

}  // namespace detail

/// Nearest passable cell (Euclidean, ties to lower y then lower x) within
/// `max_cells` of (x, y), or nullopt.
inline std::optional<std::array<int, 2>> nearest_free_cell(const PlanningGrid& g, int x, int y, double max_cells) {
  std::optional<std::array<int, 2>> best;
  double best_d2 = max_cells * max_cells + 1e-9;
  const int r = static_cast<int>(std::ceil(max_cells));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2 && g.passable(x + dx, y + dy)) {
        best_d2 = d2;
        best = std::array<int, 2>{x + dx, y + dy};
      }
    }
  return best;
}

/// Jump point search over the 8-connected grid (diagonal cost sqrt(2), no
/// corner cutting). Cell-level variant; returns the jump points and the cost
/// in cells, or nullopt when unreachable.
struct CellPath {
  std::vector<std::array<int, 2>> cells;
  double cost = 0.0;
};

inline std::optional<CellPath> jps_search(const PlanningGrid& g, std::array<int, 2> start, std::array<int, 2> goal) {
  if (!g.passable(start[0], start[1]) || !g.passable(goal[0], goal[1])) return std::nullopt;
  if (start == goal) return CellPath{{start}, 0.0};
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(n, inf);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  struct Entry {
    double f;
    double g;
    std::size_t id;
    bool operator>(const Entry& o) const {
      if (f != o.f) return f > o.f;
      if (g != o.g) return g < o.g;  // prefer deeper nodes on ties
      return id > o.id;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  auto id_of = [&](int x, int y) { return g.linear(x, y); };
  auto h = [&](int x, int y) { return octile(goal[0] - x, goal[1] - y); };

  const std::size_t sid = id_of(start[0], start[1]);
  cost[sid] = 0.0;
  open.push({h(start[0], start[1]), 0.0, sid});
  detail::JumpPointSearch jps(g, goal);
  std::vector<std::array<int, 2>> dirs;
  const std::size_t gid = id_of(goal[0], goal[1]);
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (closed[e.id]) continue;
    closed[e.id] = 1;
    if (e.id == gid) break;
    const int x = static_cast<int>(e.id % g.width);
    const int y = static_cast<int>(e.id / g.width);
    std::optional<std::array<int, 2>> par;
    if (parent[e.id] >= 0) {
      const auto pid = static_cast<std::size_t>(parent[e.id]);
      par = std::array<int, 2>{static_cast<int>(pid % g.width), static_cast<int>(pid / g.width)};
    }
    jps.directions(x, y, par, dirs);
    for (const auto& d : dirs) {
      const auto jp = jps.jump(x, y, d[0], d[1]);
      if (!jp) continue;
      const std::size_t jid = id_of((*jp)[0], (*jp)[1]);
      if (closed[jid]) continue;
      const double ng = cost[e.id] + octile((*jp)[0] - x, (*jp)[1] - y);
      if (ng < cost[jid]) {
        cost[jid] = ng;
        parent[jid] = static_cast<std::int64_t>(e.id);
        open.push({ng + h((*jp)[0], (*jp)[1]), ng, jid});
      }
    }
  }
  if (!closed[gid]) return std::nullopt;
  CellPath out;
  out.cost = cost[gid];
  for (std::int64_t id = static_cast<std::int64_t>(gid); id >= 0; id = parent[static_cast<std::size_t>(id)])
    out.cells.push_back({static_cast<int>(id % g.width), static_cast<int>(id / g.width)});
  std::reverse(out.cells.begin(), out.cells.end());
  return out;
}

/// Shortest grid path from start to goal in world meters. A blocked goal is
/// moved to the nearest free cell within `relocate_radius` (flagged in the
/// result). Throws NoPathError when no path exists.
inline GlobalPath jps_plan(const PlanningGrid& g, const Vec2& start, const Vec2& goal, double relocate_radius = 1.0) {
  const auto s = g.cell_of(start);
  auto gc = g.cell_of(goal);
  if (!g.passable(s[0], s[1])) throw NoPathError("jps_plan: start cell is blocked or outside the grid");
  if (!g.in_bounds(gc[0], gc[1])) throw NoPathError("jps_plan: goal outside the grid");
  GlobalPath path;
  if (!g.passable(gc[0], gc[1])) {
    const auto nf = nearest_free_cell(g, gc[0], gc[1], relocate_radius / g.resolution);
    if (!nf) throw NoPathError("jps_plan: goal blocked and no free cell within relocation radius");
    gc = *nf;
    path.goal_relocated = true;
  }
  const auto found = jps_search(g, s, gc);
  if (!found) throw NoPathError("jps_plan: start and goal are not connected");
  path.cells = found->cells;
  path.length = found->cost * g.resolution;
  for (const auto& c : path.cells) path.waypoints.push_back(g.center_of(c[0], c[1]));
  path.goal = path.waypoints.back();
  return path;
}

// ---------------------------------------------------------------------------
// Local goal

struct LocalGoal {
  Vec3 point = Vec3::Zero();
  double heading = 0.0;
};

/// Local goal along the tangent at the start of the quadratic Bezier curve
/// whose control points are the first three path waypoints. B'(0) = 2(P1 - P0),
/// so the goal sits on the ray from P0 through P1 at min(lookahead, path length).
/// With fewer than three waypoints the path is followed as a straight line;
/// a single waypoint is the goal itself.
inline LocalGoal bezier_local_goal(const GlobalPath& path, const Vec2& vehicle_xy, double cruise_alt,
                                   double lookahead = 1.5) {
  if (path.waypoints.empty()) throw DomainError("bezier_local_goal: empty path");
  LocalGoal out;
  const auto& w = path.waypoints;
  if (w.size() == 1) {
    out.point = Vec3(w[0].x(), w[0].y(), cruise_alt);
    const Vec2 d = w[0] - vehicle_xy;
    out.heading = d.norm() > 1e-9 ? std::atan2(d.y(), d.x()) : 0.0;
    return out;
  }
  const Vec2 p0 = w[0];
  Vec2 tangent;
  if (w.size() >= 3) {
    // Quadratic Bezier B(t) = (1-t)^2 P0 + 2t(1-t) P1 + t^2 P2.
    tangent = 2.0 * (w[1] - w[0]);
  } else {
    tangent = w[1] - w[0];
  }
  if (tangent.norm() < 1e-12) tangent = w.back() - p0;
  double remaining = 0.0;
  for (std::size_t i = 1; i < w.size(); ++i) remaining += (w[i] - w[i - 1]).norm();
  const double dist = std::min(lookahead, remaining);
  const Vec2 dir = tangent.norm() > 1e-12 ? Vec2(tangent.normalized()) : Vec2(1.0, 0.0);
  const Vec2 g = p0 + dir * dist;
  out.point = Vec3(g.x(), g.y(), cruise_alt);
  out.heading = std::atan2(dir.y(), dir.x());
  return out;
}

}  // namespace navsim
