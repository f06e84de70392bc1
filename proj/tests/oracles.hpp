#pragma once

// Reference implementations used only by tests. Each one solves the same
// problem as a production routine by a slower, more direct method.

#include "navsim/mapping.hpp"
#include "navsim/planning/grid.hpp"
#include "navsim/planning/jps.hpp"
#include "navsim/planning/primitive.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

namespace navsim::oracle {

/// Signed distance by exhaustive scan over all cell pairs.
inline std::vector<double> brute_force_esdf(const ProjectedGrid2D& g, CellState unknown_is, double d_max) {
  const int w = g.width, h = g.height;
  std::vector<std::uint8_t> occ(g.cells.size());
  for (std::size_t i = 0; i < occ.size(); ++i) {
    CellState c = g.cells[i];
    if (c == CellState::unknown) c = unknown_is;
    occ[i] = c == CellState::occupied;
  }
  std::vector<double> out(occ.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool self = occ[static_cast<std::size_t>(y) * w + x];
      long best = std::numeric_limits<long>::max();
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
          if (occ[static_cast<std::size_t>(v) * w + u] == self) continue;
          const long d2 = static_cast<long>(u - x) * (u - x) + static_cast<long>(v - y) * (v - y);
          best = std::min(best, d2);
        }
      const double d = best == std::numeric_limits<long>::max()
                           ? std::numeric_limits<double>::infinity()
                           : std::sqrt(static_cast<double>(best)) * g.resolution;
      out[static_cast<std::size_t>(y) * w + x] = self ? -std::min(d_max, d) : std::min(d_max, d);
    }
  return out;
}

/// Path cost a + b*sqrt(2) kept as the integer pair (straight, diagonal).
/// sqrt(2) is irrational, so two costs are equal iff both counts are equal.
struct OctileCost {
  long straight = 0;
  long diagonal = 0;
  double value() const { return static_cast<double>(straight) + std::sqrt(2.0) * static_cast<double>(diagonal); }
  bool operator==(const OctileCost&) const = default;
};

/// Plain 8-connected Dijkstra with the no-corner-cutting rule of `can_move`.
inline std::optional<OctileCost> dijkstra_8(const PlanningGrid& g, std::array<int, 2> s, std::array<int, 2> t) {
  if (!g.passable(s[0], s[1]) || !g.passable(t[0], t[1])) return std::nullopt;
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<OctileCost> cost(n);
  std::vector<std::uint8_t> done(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const std::size_t sid = g.linear(s[0], s[1]);
  dist[sid] = 0.0;
  pq.push({0.0, sid});
  while (!pq.empty()) {
    const auto [d, id] = pq.top();
    pq.pop();
    if (done[id]) continue;
    done[id] = 1;
    const int x = static_cast<int>(id % g.width), y = static_cast<int>(id / g.width);
    if (x == t[0] && y == t[1]) return cost[id];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!can_move(g, x, y, dx, dy)) continue;
        const std::size_t nid = g.linear(x + dx, y + dy);
        OctileCost c = cost[id];
        if (dx != 0 && dy != 0)
          ++c.diagonal;
        else
          ++c.straight;
        if (c.value() < dist[nid]) {
          dist[nid] = c.value();
          cost[nid] = c;
          pq.push({dist[nid], nid});
        }
      }
  }
  return std::nullopt;
}

/// Cost of a cell path whose consecutive cells differ by a pure straight or
/// pure diagonal run (as jump points do).
inline OctileCost path_octile_cost(const std::vector<std::array<int, 2>>& cells) {
  OctileCost c;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const int dx = std::abs(cells[i][0] - cells[i - 1][0]);
    const int dy = std::abs(cells[i][1] - cells[i - 1][1]);
    const int diag = std::min(dx, dy);
    c.diagonal += diag;
    c.straight += std::max(dx, dy) - diag;
  }
  return c;
}

/// Minimum of the integral of |a|^2 over C1 piecewise-cubic trajectories on
/// `knots` equally spaced points, as an equality-constrained QP solved through
/// its KKT system. Unknowns per axis: position and velocity at every knot.
/// Returns the optimal cost summed over the three axes.
inline double discretized_min_acc_cost(const Vec3& p0, const Vec3& v0, const Vec3& p1, const Vec3& v1, double T,
                                       int knots = 100) {
  const int segs = knots - 1;
  const double h = T / segs;
  const int nv = 2 * knots;  // (p_k, v_k)
  // Hermite segment acceleration at s in [0, h] is linear; integrate a^2 exactly
  // with Simpson's rule on the endpoint and midpoint accelerations.
  auto accel_row = [h](double s) {
    // Second derivatives of the Hermite basis (h00, h10, h01, h11) in physical time.
    const double u = s / h;
    Eigen::RowVector4d r;
    r << (12.0 * u - 6.0) / (h * h), (6.0 * u - 4.0) / h, (-12.0 * u + 6.0) / (h * h), (6.0 * u - 2.0) / h;
    return r;
  };
  const Eigen::RowVector4d a0 = accel_row(0.0), am = accel_row(0.5 * h), a1 = accel_row(h);
  const Eigen::Matrix4d q_seg =
      (h / 6.0) * (a0.transpose() * a0 + 4.0 * am.transpose() * am + a1.transpose() * a1);

  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(nv, nv);
  for (int k = 0; k < segs; ++k) {
    const int idx[4] = {2 * k, 2 * k + 1, 2 * k + 2, 2 * k + 3};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) Q(idx[i], idx[j]) += q_seg(i, j);
  }
  double total = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    // Constraints: p_0, v_0, p_N, v_N.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, nv);
    A(0, 0) = 1.0;
    A(1, 1) = 1.0;
    A(2, 2 * segs) = 1.0;
    A(3, 2 * segs + 1) = 1.0;
    Eigen::Vector4d b(p0[axis], v0[axis], p1[axis], v1[axis]);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + 4, nv + 4);
    K.topLeftCorner(nv, nv) = 2.0 * Q;
    K.topRightCorner(nv, 4) = A.transpose();
    K.bottomLeftCorner(4, nv) = A;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv + 4);
    rhs.tail(4) = b;
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    const Eigen::VectorXd x = sol.head(nv);
    total += x.dot(Q * x);
  }
  return total;
}

/// Numerical integral of |a|^2 along a primitive (composite Simpson).
inline double quadrature_cost(const MotionPrimitive& m, int n = 2000) {
  const double h = m.duration / n;
  double s = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    s += w * m.acceleration_at(k * h).squaredNorm();
  }
  return s * h / 3.0;
}

}  // namespace navsim::oracle
