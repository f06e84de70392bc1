#pragma once

#include "navsim/config.hpp"
#include "navsim/runtime/log.hpp"
#include "navsim/runtime/simulator.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace navsim {

/// Simulated seconds per wall second.
inline double real_time_factor(double sim_seconds, double wall_seconds) {
  if (!(wall_seconds > 0.0)) throw DomainError("real_time_factor: wall time must be > 0");
  return sim_seconds / wall_seconds;
}

inline double real_time_factor(const SimLog& log, double wall_seconds) {
  const double sim = log.ground_truth.empty() ? 0.0 : log.ground_truth.back().t;
  return real_time_factor(sim, wall_seconds);
}

struct MissionMetrics {
  std::string verdict;
  std::string reason;
  double sim_duration = 0.0;         // s
  double ate_rmse = 0.0;             // m, estimate vs truth, no alignment
  double max_speed = 0.0;            // m/s, ground truth
  double min_clearance = 0.0;        // m, ground truth to the nearest box
  double distance_traveled = 0.0;    // m, ground truth
  std::size_t goals_submitted = 0;
  std::size_t goals_reached = 0;     // goal_reached events
  std::vector<double> goal_errors;   // m, closest horizontal approach after each submission
  double max_goal_error = 0.0;
  std::size_t ground_truth_records = 0;
  std::size_t estimate_records = 0;

  bool operator==(const MissionMetrics&) const = default;
};

inline Trajectory estimate_trajectory(const SimLog& log) {
  Trajectory t;
  t.reserve(log.estimates.size());
  for (const auto& e : log.estimates) t.push_back({e.t, Pose{e.position, e.attitude}});
  return t;
}

inline Trajectory ground_truth_trajectory(const SimLog& log, const Pose& body_to_imu = Pose::identity()) {
  Trajectory t;
  t.reserve(log.ground_truth.size());
  for (const auto& g : log.ground_truth) t.push_back({g.t, Pose{g.position, g.attitude}.compose(body_to_imu)});
  return t;
}

/// World stored in a log header.
inline WorldModel world_from_header(const nlohmann::json& header) {
  if (!header.contains("world")) return WorldModel(WorldBounds{}, {});
  return load_world(header.at("world").dump());
}

/// Evaluation over a complete log; a replayed log yields identical values.
inline MissionMetrics compute_metrics(const SimLog& log) {
  MissionMetrics m;
  const WorldModel world = world_from_header(log.header);
  if (log.end) {
    m.verdict = log.end->verdict;
    m.reason = log.end->reason;
  }
  m.ground_truth_records = log.ground_truth.size();
  m.estimate_records = log.estimates.size();
  if (!log.ground_truth.empty()) m.sim_duration = log.ground_truth.back().t;

  m.min_clearance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log.ground_truth.size(); ++i) {
    const auto& g = log.ground_truth[i];
    m.max_speed = std::max(m.max_speed, g.velocity.norm());
    m.min_clearance = std::min(m.min_clearance, world.clearance(g.position));
    if (i > 0) m.distance_traveled += (g.position - log.ground_truth[i - 1].position).norm();
  }
  if (log.ground_truth.empty()) m.min_clearance = 0.0;

  if (log.estimates.size() >= 2 && log.ground_truth.size() >= 2)
    m.ate_rmse = compute_ate_rmse({estimate_trajectory(log), ground_truth_trajectory(log)}, Alignment::none, 0.02);

  for (const auto& e : log.events) {
    if (e.kind == "goal_reached") ++m.goals_reached;
    if (e.kind != "goal_submitted") continue;
    ++m.goals_submitted;
    const Vec2 goal(e.data.at("x").get<double>(), e.data.at("y").get<double>());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : log.ground_truth)
      if (g.t >= e.t) best = std::min(best, (g.position.head<2>() - goal).norm());
    m.goal_errors.push_back(best);
    m.max_goal_error = std::max(m.max_goal_error, best);
  }
  return m;
}

inline nlohmann::json metrics_to_json(const MissionMetrics& m) {
  return {{"verdict", m.verdict},
          {"reason", m.reason},
          {"sim_duration_s", m.sim_duration},
          {"ate_rmse_m", m.ate_rmse},
          {"max_speed_mps", m.max_speed},
          {"min_clearance_m", m.min_clearance},
          {"distance_traveled_m", m.distance_traveled},
          {"goals_submitted", m.goals_submitted},
          {"goals_reached", m.goals_reached},
          {"goal_errors_m", m.goal_errors},
          {"max_goal_error_m", m.max_goal_error},
          {"ground_truth_records", m.ground_truth_records},
          {"estimate_records", m.estimate_records}};
}

/// Occupancy grid against the true obstacle footprints, with a tolerance band
/// of `band_cells` cells. A cell is truly occupied when its square overlaps a
/// footprint (positive area) of a box reaching into the projection band.
struct MapFidelity {
  std::size_t occupied = 0;              // cells marked occupied
  double max_occupied_distance = 0.0;    // m, worst square-to-footprint gap among occupied cells
  std::size_t free_observed = 0;         // truly free, not unknown
  std::size_t false_occupied = 0;        // ... marked occupied (strict, no band)
  std::size_t free_outside_band = 0;     // truly free, not unknown, farther than the band from every footprint
  std::size_t false_outside_band = 0;    // ... marked occupied
  std::size_t surface_seen = 0;          // footprint cells bordering free space with an observed neighbor
  std::size_t surface_matched = 0;       // ... with an occupied cell within the band

  double strict_false_rate() const { return ratio(false_occupied, free_observed); }
  double false_rate() const { return ratio(false_outside_band, free_outside_band); }
  double surface_recall() const { return surface_seen ? ratio(surface_matched, surface_seen) : 1.0; }

 private:
  static double ratio(std::size_t a, std::size_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  }
};

inline MapFidelity map_fidelity(const ProjectedGrid2D& grid, const WorldModel& world, const ProjectionParams& proj,
                                int band_cells = 1) {
  std::vector<Box> boxes;
  for (const auto& b : world.obstacles())
    if (b.max.z() > proj.z_min && b.min.z() < proj.z_max) boxes.push_back(b);
  const double h = 0.5 * grid.resolution;
  const double band = band_cells * grid.resolution;
  std::vector<double> gap(grid.cells.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> truth(grid.cells.size(), 0);
  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x) {
      const Vec2 c = grid.center_of(x, y);
      const std::size_t i = grid.linear(x, y);
      for (const auto& b : boxes) {
        const double ox = std::min(c.x() + h, b.max.x()) - std::max(c.x() - h, b.min.x());
        const double oy = std::min(c.y() + h, b.max.y()) - std::max(c.y() - h, b.min.y());
        if (ox > 1e-9 && oy > 1e-9) truth[i] = 1;
        gap[i] = std::min(gap[i], std::hypot(std::max(0.0, -ox), std::max(0.0, -oy)));
      }
    }
  auto any_near = [&](int x, int y, int r, auto pred) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (grid.in_bounds(x + dx, y + dy) && pred(x + dx, y + dy)) return true;
    return false;
  };
  MapFidelity f;
  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = grid.linear(x, y);
      const CellState s = grid.at(x, y);
      if (s == CellState::occupied) {
        ++f.occupied;
        f.max_occupied_distance = std::max(f.max_occupied_distance, gap[i]);
      }
      if (!truth[i]) {
        if (s == CellState::unknown) continue;
        ++f.free_observed;
        if (s == CellState::occupied) ++f.false_occupied;
        if (gap[i] > band + 1e-9) {
          ++f.free_outside_band;
          if (s == CellState::occupied) ++f.false_outside_band;
        }
        continue;
      }
      const bool surface = any_near(x, y, 1, [&](int u, int v) { return !truth[grid.linear(u, v)]; });
      if (!surface) continue;
      if (!any_near(x, y, 1, [&](int u, int v) { return grid.at(u, v) != CellState::unknown; })) continue;
      ++f.surface_seen;
      if (any_near(x, y, band_cells, [&](int u, int v) { return grid.at(u, v) == CellState::occupied; }))
        ++f.surface_matched;
    }
  return f;
}

/// Grid stored in a map checkpoint record.
inline ProjectedGrid2D grid_from_record(const MapRecord& r) {
  ProjectedGrid2D g(r.width, r.height, r.resolution, r.origin);
  for (std::size_t i = 0; i < g.cells.size() && i < r.cells.size(); ++i)
    g.cells[i] = r.cells[i] == '#' ? CellState::occupied : (r.cells[i] == '.' ? CellState::free : CellState::unknown);
  return g;
}

/// Re-runs the IMU -> vision -> estimator chain over recorded ground truth
/// with the live scheduling and random streams of `seed`. With the seed of the
/// recording run this reproduces the logged estimates exactly; other seeds
/// give independent noise realizations over the same flight. `initial` is
/// the tick-0 body pose (defaults to the first record's pose).
inline std::vector<EstimateRecord> replay_estimator(const std::vector<GroundTruthRecord>& gt, const SimConfig& cfg,
                                                    std::uint64_t seed, std::optional<Pose> initial = {}) {
  std::vector<EstimateRecord> out;
  if (gt.empty()) return out;
  const int tick_hz = cfg.tick_hz();
  VioEstimator est(cfg.estimator, cfg.gravity, Rng::stream(seed, 2));
  Rng imu_rng = Rng::stream(seed, 1);
  ImuBiasState bias;
  // The first record is tick 1; the estimator starts from the tick-0 pose at rest.
  const Pose p0 = initial.value_or(Pose{gt.front().position, gt.front().attitude});
  est.initialize(p0.compose(cfg.body_to_imu), Vec3::Zero(), 0.0);
  out.reserve(gt.size() * static_cast<std::size_t>(cfg.imu_hz) / static_cast<std::size_t>(tick_hz) + 1);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint64_t tick = i + 1;
    if (!rate_due(tick, cfg.imu_hz, tick_hz)) continue;
    const std::uint64_t imu_index = tick * static_cast<std::uint64_t>(cfg.imu_hz) / tick_hz;
    const bool camera = rate_due(imu_index, cfg.camera_hz, cfg.imu_hz);
    const auto& g = gt[i];
    RigidBodyState s;
    s.position = g.position;
    s.velocity = g.velocity;
    s.attitude = g.attitude;
    s.body_rate = g.body_rate;
    const ImuSample sample = sample_imu(s, g.acceleration, cfg.imu, bias, imu_rng, 1.0 / cfg.imu_hz, cfg.gravity, g.t);
    est.on_imu(sample);
    if (camera) est.on_vision(ground_truth_pose(s, cfg.body_to_imu), g.t);
    EstimateRecord r;
    r.t = g.t;
    r.phase = Phase::estimator;
    r.position = est.estimate().pose.position;
    r.velocity = est.estimate().velocity;
    r.attitude = est.estimate().pose.orientation;
    r.vision_corrected = camera;
    out.push_back(r);
  }
  return out;
}

/// ATE of a replayed estimator run against the same ground truth.
inline double replay_ate(const std::vector<GroundTruthRecord>& gt, const SimConfig& cfg, std::uint64_t seed,
                         std::optional<Pose> initial = {}) {
  const auto est = replay_estimator(gt, cfg, seed, initial);
  TrajectoryPair pair;
  for (const auto& e : est) pair.estimated.push_back({e.t, Pose{e.position, e.attitude}});
  for (const auto& g : gt) pair.ground_truth.push_back({g.t, Pose{g.position, g.attitude}.compose(cfg.body_to_imu)});
  return compute_ate_rmse(pair, Alignment::none, 0.02);
}

}  // namespace navsim
