#pragma once

#include "navsim/common.hpp"
#include "navsim/sensors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace navsim {

struct Index3 {
  int x = 0;
  int y = 0;
  int z = 0;
  bool operator==(const Index3&) const = default;
};

struct OccupancyParams {
  double l_occ = 0.85;
  double l_free = -0.4;
  double l_min = -3.5;
  double l_max = 3.5;
};

inline double probability_from_log_odds(double l) { return 1.0 / (1.0 + std::exp(-l)); }

/// Probabilistic occupancy voxel map on a fixed Cartesian lattice. Voxel
/// (i, j, k) spans origin + [i, i+1) * voxel_size on each axis.
class GlobalOccupancyMap {
 public:
  GlobalOccupancyMap() = default;
  GlobalOccupancyMap(const Vec3& origin, double voxel_size, std::array<int, 3> dims, OccupancyParams params = {})
      : origin_(origin), voxel_size_(voxel_size), dims_(dims), params_(params) {
    if (!(voxel_size > 0.0)) throw DomainError("voxel_size must be > 0");
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw DomainError("map dims must be >= 1");
    const auto n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    log_odds_.assign(n, 0.0f);
    observed_.assign(n, 0);
  }

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const OccupancyParams& params() const { return params_; }
  std::size_t size() const { return log_odds_.size(); }
  std::uint64_t version() const { return version_; }

  bool in_bounds(const Index3& i) const {
    return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < dims_[0] && i.y < dims_[1] && i.z < dims_[2];
  }

  std::size_t linear(const Index3& i) const {
    return (static_cast<std::size_t>(i.z) * dims_[1] + static_cast<std::size_t>(i.y)) * dims_[0] +
           static_cast<std::size_t>(i.x);
  }

  Index3 index_of(const Vec3& p) const {
    const Vec3 g = (p - origin_) / voxel_size_;
    return {static_cast<int>(std::floor(g.x())), static_cast<int>(std::floor(g.y())),
            static_cast<int>(std::floor(g.z()))};
  }

  Vec3 center_of(const Index3& i) const {
    return origin_ + voxel_size_ * Vec3(i.x + 0.5, i.y + 0.5, i.z + 0.5);
  }

  float log_odds(const Index3& i) const { return log_odds_[linear(i)]; }
  bool observed(const Index3& i) const { return observed_[linear(i)] != 0; }
  double probability(const Index3& i) const { return probability_from_log_odds(log_odds(i)); }

  void update(const Index3& i, double delta) {
    const std::size_t k = linear(i);
    const double v = std::clamp(static_cast<double>(log_odds_[k]) + delta, params_.l_min, params_.l_max);
    log_odds_[k] = static_cast<float>(v);
    observed_[k] = 1;
  }

  void bump_version() { ++version_; }

  const std::vector<float>& raw_log_odds() const { return log_odds_; }
  const std::vector<std::uint8_t>& raw_observed() const { return observed_; }

 private:
  Vec3 origin_ = Vec3::Zero();
  double voxel_size_ = 0.2;
  std::array<int, 3> dims_{1, 1, 1};
  OccupancyParams params_;
  std::vector<float> log_odds_;
  std::vector<std::uint8_t> observed_;
  std::uint64_t version_ = 0;
};

/// Visits the voxels pierced by segment a->b in order (Amanatides-Woo grid
/// walk), including the voxel of `a` and the voxel of `b`. Coordinates are in
/// voxel units relative to the map origin. Visits stop when `visit` returns false.
template <typename Visit>
void walk_voxels(const Vec3& a, const Vec3& b, Visit&& visit) {
  Index3 cur{static_cast<int>(std::floor(a.x())), static_cast<int>(std::floor(a.y())),
             static_cast<int>(std::floor(a.z()))};
  const Index3 end{static_cast<int>(std::floor(b.x())), static_cast<int>(std::floor(b.y())),
                   static_cast<int>(std::floor(b.z()))};
  const Vec3 d = b - a;
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  const std::array<int, 3> c{cur.x, cur.y, cur.z};
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] > 0.0) {
      step[ax] = 1;
      t_delta[ax] = 1.0 / d[ax];
      t_max[ax] = (c[ax] + 1.0 - a[ax]) / d[ax];
    } else if (d[ax] < 0.0) {
      step[ax] = -1;
      t_delta[ax] = -1.0 / d[ax];
      t_max[ax] = (a[ax] - c[ax]) / -d[ax];
    } else {
      step[ax] = 0;
      t_delta[ax] = std::numeric_limits<double>::infinity();
      t_max[ax] = std::numeric_limits<double>::infinity();
    }
  }
  const int max_steps = std::abs(end.x - cur.x) + std::abs(end.y - cur.y) + std::abs(end.z - cur.z);
  if (!visit(cur)) return;
  for (int n = 0; n < max_steps; ++n) {
    int ax = 0;
    if (t_max[1] < t_max[ax]) ax = 1;
    if (t_max[2] < t_max[ax]) ax = 2;
    if (ax == 0) {
      cur.x += step[0];
    } else if (ax == 1) {
      cur.y += step[1];
    } else {
      cur.z += step[2];
    }
    t_max[ax] += t_delta[ax];
    if (!visit(cur)) return;
  }
}

inline constexpr double kEndpointNudge = 1e-3;  // voxels

/// Log-odds ray update: voxels traversed from the sensor origin up to (not
/// including) each endpoint get l_free, the endpoint voxel gets l_occ.
/// Voxels outside the map are skipped.
inline void integrate_pointcloud(GlobalOccupancyMap& map, const Pose& sensor_pose, const PointCloud& cloud) {
  if (cloud.points.empty()) return;
  const double inv = 1.0 / map.voxel_size();
  const Vec3 o = (sensor_pose.position - map.origin()) * inv;
  const auto& params = map.params();
  for (const auto& pf : cloud.points) {
    const Vec3 pw = sensor_pose.apply(pf.cast<double>());
    const Vec3 e = (pw - map.origin()) * inv;
    // A return on a face shared by two voxels belongs to the one the beam
    // enters, so the endpoint is pushed 1e-3 voxel along the ray before flooring.
    const Vec3 ray = e - o;
    const double len = ray.norm();
    const Vec3 ein = len > 0.0 ? Vec3(e + ray * (kEndpointNudge / len)) : e;
    const Index3 end{static_cast<int>(std::floor(ein.x())), static_cast<int>(std::floor(ein.y())),
                     static_cast<int>(std::floor(ein.z()))};
    walk_voxels(o, e, [&](const Index3& v) {
      if (v == end) return false;
      if (map.in_bounds(v)) map.update(v, params.l_free);
      return true;
    });
    if (map.in_bounds(end)) map.update(end, params.l_occ);
  }
  map.bump_version();
}

// ---------------------------------------------------------------------------
// Local cylindrical map

struct LocalMapParams {
  int n_azimuth = 36;
  int n_ring = 20;
  int n_z = 6;
  double max_radius = 5.0;  // m
  double z_min = -1.2;      // m, relative to the vehicle
  double z_max = 1.2;
};

/// Vehicle-centered, yaw-aligned hit-count grid over (azimuth, radius, z).
/// Azimuth bin i covers [-pi + i*d, -pi + (i+1)*d).
class LocalCylindricalMap {
 public:
  LocalCylindricalMap() = default;
  LocalCylindricalMap(LocalMapParams p, const Pose& vehicle_pose)
      : params_(p), center_(vehicle_pose.position), yaw_(yaw_of(vehicle_pose.orientation)) {
    counts_.assign(static_cast<std::size_t>(p.n_azimuth) * p.n_ring * p.n_z, 0);
  }

  const LocalMapParams& params() const { return params_; }
  const Vec3& center() const { return center_; }
  double yaw() const { return yaw_; }
  std::size_t cell_count() const { return counts_.size(); }

  double azimuth_step() const { return 2.0 * kPi / params_.n_azimuth; }
  double ring_step() const { return params_.max_radius / params_.n_ring; }
  double z_step() const { return (params_.z_max - params_.z_min) / params_.n_z; }

  std::size_t linear(int az, int ring, int z) const {
    return (static_cast<std::size_t>(z) * params_.n_ring + static_cast<std::size_t>(ring)) * params_.n_azimuth +
           static_cast<std::size_t>(az);
  }

  std::uint32_t count(int az, int ring, int z) const { return counts_[linear(az, ring, z)]; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }

  /// Vehicle-frame coordinates (x forward along yaw, y left, z up) of a world point.
  Vec3 to_local(const Vec3& world) const {
    const Vec3 d = world - center_;
    const double c = std::cos(yaw_);
    const double s = std::sin(yaw_);
    return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
  }

  Vec3 to_world(const Vec3& local) const {
    const double c = std::cos(yaw_);
    const double s = std::sin(yaw_);
    return center_ + Vec3(c * local.x() - s * local.y(), s * local.x() + c * local.y(), local.z());
  }

  /// Bin of a vehicle-frame point; false when outside the map volume.
  bool bin_of(const Vec3& local, int& az, int& ring, int& z) const {
    const double r = std::hypot(local.x(), local.y());
    if (r >= params_.max_radius || local.z() < params_.z_min || local.z() >= params_.z_max) return false;
    const double th = std::atan2(local.y(), local.x());
    az = std::clamp(static_cast<int>(std::floor((th + kPi) / azimuth_step())), 0, params_.n_azimuth - 1);
    ring = std::clamp(static_cast<int>(std::floor(r / ring_step())), 0, params_.n_ring - 1);
    z = std::clamp(static_cast<int>(std::floor((local.z() - params_.z_min) / z_step())), 0, params_.n_z - 1);
    return true;
  }

  void add(const Vec3& world) {
    int a, r, z;
    if (bin_of(to_local(world), a, r, z)) ++counts_[linear(a, r, z)];
  }

  bool operator==(const LocalCylindricalMap& o) const {
    return counts_ == o.counts_ && center_ == o.center_ && yaw_ == o.yaw_;
  }

 private:
  LocalMapParams params_;
  Vec3 center_ = Vec3::Zero();
  double yaw_ = 0.0;
  std::vector<std::uint32_t> counts_;
};

/// Fresh local map from world-frame points around the vehicle.
inline LocalCylindricalMap rebuild_local_map(const std::vector<Vec3>& world_points, const Pose& vehicle_pose,
                                             const LocalMapParams& params = {}) {
  LocalCylindricalMap m(params, vehicle_pose);
  for (const auto& p : world_points) m.add(p);
  return m;
}

/// Same, from a sensor-frame cloud and the sensor's world pose.
inline LocalCylindricalMap rebuild_local_map(const PointCloud& cloud, const Pose& sensor_pose,
                                             const Pose& vehicle_pose, const LocalMapParams& params = {}) {
  LocalCylindricalMap m(params, vehicle_pose);
  for (const auto& p : cloud.points) m.add(sensor_pose.apply(p.cast<double>()));
  return m;
}

// ---------------------------------------------------------------------------
// Projected 2-D grid and ESDF

enum class CellState : std::uint8_t { free = 0, occupied = 1, unknown = 2 };

struct ProjectedGrid2D {
  int width = 0;   // cells along x
  int height = 0;  // cells along y
  double resolution = 0.2;
  Vec2 origin = Vec2::Zero();  // world xy of the (0, 0) cell corner
  std::vector<CellState> cells;

  ProjectedGrid2D() = default;
  ProjectedGrid2D(int w, int h, double res, Vec2 org, CellState fill = CellState::unknown)
      : width(w), height(h), resolution(res), origin(org), cells(static_cast<std::size_t>(w) * h, fill) {}

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t linear(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  CellState at(int x, int y) const { return cells[linear(x, y)]; }
  CellState& at(int x, int y) { return cells[linear(x, y)]; }

  Vec2 center_of(int x, int y) const { return origin + resolution * Vec2(x + 0.5, y + 0.5); }
  std::array<int, 2> cell_of(const Vec2& p) const {
    const Vec2 g = (p - origin) / resolution;
    return {static_cast<int>(std::floor(g.x())), static_cast<int>(std::floor(g.y()))};
  }

  bool operator==(const ProjectedGrid2D&) const = default;
};

struct ProjectionParams {
  double z_min = 0.4;  // m, band bottom
  double z_max = 2.6;  // m, band top
  double p_occ = 0.7;
  double p_free = 0.3;
};

/// Column (i, j) is occupied when any band voxel exceeds p_occ, free when it has
/// observed voxels and all of them are below p_free, unknown otherwise.
inline ProjectedGrid2D project_to_2d(const GlobalOccupancyMap& map, const ProjectionParams& p = {}) {
  if (!(p.p_occ > 0.0 && p.p_occ < 1.0 && p.p_free > 0.0 && p.p_free < 1.0 && p.p_occ > p.p_free))
    throw DomainError("project_to_2d: thresholds must lie in (0,1) with p_occ > p_free");
  const auto& d = map.dims();
  ProjectedGrid2D g(d[0], d[1], map.voxel_size(), map.origin().head<2>());
  const double l_occ = std::log(p.p_occ / (1.0 - p.p_occ));
  const double l_free = std::log(p.p_free / (1.0 - p.p_free));
  // Voxels whose vertical extent overlaps the band.
  const int k0 = std::max(0, static_cast<int>(std::floor((p.z_min - map.origin().z()) / map.voxel_size())));
  const int k1 = std::min(d[2] - 1, static_cast<int>(std::ceil((p.z_max - map.origin().z()) / map.voxel_size())) - 1);
  for (int j = 0; j < d[1]; ++j) {
    for (int i = 0; i < d[0]; ++i) {
      bool any_obs = false;
      bool all_free = true;
      bool occ = false;
      for (int k = k0; k <= k1; ++k) {
        const Index3 v{i, j, k};
        if (!map.observed(v)) continue;
        any_obs = true;
        const double l = map.log_odds(v);
        if (l > l_occ) {
          occ = true;
          break;
        }
        if (!(l < l_free)) all_free = false;
      }
      g.at(i, j) = occ ? CellState::occupied : (any_obs && all_free ? CellState::free : CellState::unknown);
    }
  }
  return g;
}

/// Signed distance per cell in meters: distance from a free cell center to the
/// nearest occupied cell center, negated distance to the nearest free cell for
/// occupied cells. Magnitudes cap at d_max.
struct EsdfMap2D {
  int width = 0;
  int height = 0;
  double resolution = 0.2;
  Vec2 origin = Vec2::Zero();
  double d_max = 10.0;
  std::vector<double> distance;

  double at(int x, int y) const { return distance[static_cast<std::size_t>(y) * width + x]; }
  Vec2 center_of(int x, int y) const { return origin + resolution * Vec2(x + 0.5, y + 0.5); }
  bool contains(const Vec2& p) const {
    const Vec2 g = (p - origin) / resolution;
    return g.x() >= 0.0 && g.y() >= 0.0 && g.x() <= width && g.y() <= height;
  }
};

namespace detail {

/// 1-D squared distance transform of sampled function f (Felzenszwalb-Huttenlocher).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
                   std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  out.assign(n, inf);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s <= z[k]) {
        --k;  // z[0] is -inf, so k stays >= 0
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    out[q] = dq * dq + f[v[j]];
  }
}

/// Squared cell-unit distance from each cell to the nearest `seed` cell.
inline std::vector<double> squared_edt(int w, int h, const std::vector<std::uint8_t>& seed) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(static_cast<std::size_t>(w) * h);
  std::vector<double> f, out, z;
  std::vector<int> v;
  // Columns (along y).
  f.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = seed[static_cast<std::size_t>(y) * w + x] ? 0.0 : inf;
    edt_1d(f, out, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = out[y];
  }
  // Rows (along x).
  f.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, out, v, z);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = out[x];
  }
  return grid;
}

}  // namespace detail

inline EsdfMap2D compute_esdf(const ProjectedGrid2D& grid, CellState unknown_is = CellState::occupied,
                              double d_max = 10.0) {
  EsdfMap2D e;
  e.width = grid.width;
  e.height = grid.height;
  e.resolution = grid.resolution;
  e.origin = grid.origin;
  e.d_max = d_max;
  const std::size_t n = grid.cells.size();
  std::vector<std::uint8_t> occ(n), fre(n);
  for (std::size_t i = 0; i < n; ++i) {
    CellState c = grid.cells[i];
    if (c == CellState::unknown) c = unknown_is;
    occ[i] = c == CellState::occupied;
    fre[i] = !occ[i];
  }
  const auto d_occ = detail::squared_edt(grid.width, grid.height, occ);
  const auto d_free = detail::squared_edt(grid.width, grid.height, fre);
  e.distance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (occ[i]) {
      e.distance[i] = -std::min(d_max, std::sqrt(d_free[i]) * grid.resolution);
    } else {
      e.distance[i] = std::min(d_max, std::sqrt(d_occ[i]) * grid.resolution);
    }
  }
  return e;
}

struct DistanceGradient {
  double distance = 0.0;
  Vec2 gradient = Vec2::Zero();
};

/// Bilinear interpolation over cell centers. The gradient is the exact
/// derivative of the interpolant (the limit of its central differences);
/// points within half a cell of the border clamp to the edge centers.
inline DistanceGradient query_distance_gradient(const EsdfMap2D& esdf, const Vec2& xy) {
  if (!esdf.contains(xy)) throw DomainError("query_distance_gradient: point outside the ESDF grid");
  const Vec2 g = (xy - esdf.origin) / esdf.resolution - Vec2(0.5, 0.5);
  const double gx = std::clamp(g.x(), 0.0, static_cast<double>(esdf.width - 1));
  const double gy = std::clamp(g.y(), 0.0, static_cast<double>(esdf.height - 1));
  const int x0 = std::min(static_cast<int>(std::floor(gx)), std::max(esdf.width - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(gy)), std::max(esdf.height - 2, 0));
  const int x1 = std::min(x0 + 1, esdf.width - 1);
  const int y1 = std::min(y0 + 1, esdf.height - 1);
  const double tx = gx - x0;
  const double ty = gy - y0;
  const double d00 = esdf.at(x0, y0), d10 = esdf.at(x1, y0), d01 = esdf.at(x0, y1), d11 = esdf.at(x1, y1);
  DistanceGradient out;
  out.distance = (1 - tx) * (1 - ty) * d00 + tx * (1 - ty) * d10 + (1 - tx) * ty * d01 + tx * ty * d11;
  const double ddx = (1 - ty) * (d10 - d00) + ty * (d11 - d01);
  const double ddy = (1 - tx) * (d01 - d00) + tx * (d11 - d10);
  // Clamped axes have zero derivative.
  out.gradient.x() = (g.x() < 0.0 || g.x() > esdf.width - 1 || x1 == x0) ? 0.0 : ddx / esdf.resolution;
  out.gradient.y() = (g.y() < 0.0 || g.y() > esdf.height - 1 || y1 == y0) ? 0.0 : ddy / esdf.resolution;
  return out;
}

// ---------------------------------------------------------------------------
// Export

/// Grayscale PGM (P5), row 0 at the top = highest y. Free 255, unknown 128, occupied 0.
inline void write_pgm(std::ostream& os, const ProjectedGrid2D& g) {
  os << "P5\n" << g.width << ' ' << g.height << "\n255\n";
  for (int y = g.height - 1; y >= 0; --y)
    for (int x = 0; x < g.width; ++x) {
      const CellState c = g.at(x, y);
      const unsigned char v = c == CellState::free ? 255 : (c == CellState::occupied ? 0 : 128);
      os.put(static_cast<char>(v));
    }
}

/// ESDF as PGM: -d_max..+d_max mapped linearly onto 0..255.
inline void write_pgm(std::ostream& os, const EsdfMap2D& e) {
  os << "P5\n" << e.width << ' ' << e.height << "\n255\n";
  for (int y = e.height - 1; y >= 0; --y)
    for (int x = 0; x < e.width; ++x) {
      const double t = (e.at(x, y) + e.d_max) / (2.0 * e.d_max);
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0))));
    }
}

/// Text grid dump: header then one line of occupancy probabilities per (y, z) row.
inline void write_grid_dump(std::ostream& os, const GlobalOccupancyMap& m) {
  os << "NAVSIM-GRID 1\n";
  os << std::setprecision(9) << "origin " << m.origin().x() << ' ' << m.origin().y() << ' ' << m.origin().z() << '\n';
  os << "voxel_size " << m.voxel_size() << '\n';
  os << "dims " << m.dims()[0] << ' ' << m.dims()[1] << ' ' << m.dims()[2] << '\n';
  os << "order x-fastest\n";
  os << std::setprecision(6);
  for (int k = 0; k < m.dims()[2]; ++k)
    for (int j = 0; j < m.dims()[1]; ++j) {
      for (int i = 0; i < m.dims()[0]; ++i) {
        const Index3 v{i, j, k};
        os << (i ? " " : "") << (m.observed(v) ? m.probability(v) : 0.5);
      }
      os << '\n';
    }
}

}  // namespace navsim
