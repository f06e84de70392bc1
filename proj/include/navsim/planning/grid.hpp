#pragma once

#include "navsim/common.hpp"
#include "navsim/mapping.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

namespace navsim {

/// Binary traversability grid used by the global search. Cell (x, y) has its
/// lower-left corner at origin + resolution * (x, y).
struct PlanningGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.2;
  Vec2 origin = Vec2::Zero();
  std::vector<std::uint8_t> blocked;

  PlanningGrid() = default;
  PlanningGrid(int w, int h, double res, Vec2 org, bool fill_blocked = false)
      : width(w), height(h), resolution(res), origin(org),
        blocked(static_cast<std::size_t>(w) * h, fill_blocked ? 1 : 0) {}

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t linear(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool passable(int x, int y) const { return in_bounds(x, y) && !blocked[linear(x, y)]; }
  void set_blocked(int x, int y, bool b = true) { blocked[linear(x, y)] = b ? 1 : 0; }

  Vec2 center_of(int x, int y) const { return origin + resolution * Vec2(x + 0.5, y + 0.5); }
  std::array<int, 2> cell_of(const Vec2& p) const {
    const Vec2 g = (p - origin) / resolution;
    return {static_cast<int>(std::floor(g.x())), static_cast<int>(std::floor(g.y()))};
  }
};

/// Offsets of the Euclidean disk of radius r cells: dx^2 + dy^2 <= r^2.
inline std::vector<std::array<int, 2>> disk_offsets(int r) {
  std::vector<std::array<int, 2>> out;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r * r) out.push_back({dx, dy});
  return out;
}

/// Crops the projected grid to the bounding box of its observed cells plus
/// any `keep` points (`margin` cells around it), then dilates occupied cells by a
/// Euclidean disk of ceil(inflation_radius / resolution) cells. Unknown
/// cells become `unknown_is` before dilation.
inline PlanningGrid preprocess_grid(const ProjectedGrid2D& grid, double inflation_radius,
                                    CellState unknown_is = CellState::occupied, const std::vector<Vec2>& keep = {},
                                    int margin = 1) {
  int x0 = grid.width, y0 = grid.height, x1 = -1, y1 = -1;
  auto include = [&](int x, int y) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  };
  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x)
      if (grid.at(x, y) != CellState::unknown) include(x, y);
  for (const auto& p : keep) {
    const auto c = grid.cell_of(p);
    include(std::clamp(c[0], 0, grid.width - 1), std::clamp(c[1], 0, grid.height - 1));
  }
  if (x1 < 0) return PlanningGrid(0, 0, grid.resolution, grid.origin);
  x0 = std::max(0, x0 - margin);
  y0 = std::max(0, y0 - margin);
  x1 = std::min(grid.width - 1, x1 + margin);
  y1 = std::min(grid.height - 1, y1 + margin);

  const int w = x1 - x0 + 1;
  const int h = y1 - y0 + 1;
  PlanningGrid out(w, h, grid.resolution, grid.origin + grid.resolution * Vec2(x0, y0));
  const int r = inflation_radius > 0.0 ? static_cast<int>(std::ceil(inflation_radius / grid.resolution - 1e-9)) : 0;
  const auto disk = disk_offsets(r);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      CellState c = grid.at(x + x0, y + y0);
      if (c == CellState::unknown) c = unknown_is;
      if (c != CellState::occupied) continue;
      for (const auto& d : disk) {
        const int nx = x + d[0];
        const int ny = y + d[1];
        if (out.in_bounds(nx, ny)) out.set_blocked(nx, ny);
      }
    }
  }
  return out;
}

}  // namespace navsim
