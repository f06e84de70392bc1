// Acceptance run: one PASS/FAIL line per headline criterion. Tolerances are
// pinned here and nowhere else. Exit status is nonzero if any line fails.

#include "navsim/dynamics.hpp"
#include "navsim/mapping.hpp"
#include "navsim/planning/planner.hpp"
#include "navsim/sensors.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

using namespace navsim;
using namespace navsim::fixture;

namespace {

namespace tol {
constexpr double kIntrinsics = 1e-3;
constexpr int kEsdfGrids = 200;
constexpr double kEsdfBudgetS = 30.0;
constexpr int kJpsGrids = 100;
constexpr double kJpsDensity = 0.30;
constexpr double kJpsBudgetS = 60.0;
constexpr int kPrimitiveCases = 50;
constexpr double kPrimitiveRel = 1e-4;
constexpr double kBoundary = 1e-9;
constexpr double kEnergyRel = 1e-6;
constexpr double kHoverDrift = 1e-6;
constexpr double kImuStdRel = 0.02;
constexpr double kBiasVarRel = 0.05;
constexpr double kReach = 0.5;
constexpr double kSpeed = 1.0 + 1e-6;
constexpr double kClickBudgetS = 300.0;
constexpr double kAteLow = 0.2, kAteHigh = 0.4;
constexpr int kAteSeeds = 100;
constexpr double kAteZeroNoise = 0.02;
constexpr int kDilationCells = 1;
constexpr double kFalseOccupied = 0.02;
constexpr double kSurfaceRecall = 0.9;
}  // namespace tol

using clk = std::chrono::steady_clock;
double since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s [%2d] %-34s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

template <typename... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

// ---------------------------------------------------------------------------

void camera_intrinsics() {
  const auto k = intrinsics_from_fov(640, 360, 1.5);
  const double e = std::max({std::abs(k.fx - 343.4963), std::abs(k.fy - 343.4963), std::abs(k.cx - 320.0),
                             std::abs(k.cy - 180.0)});
  report(1, "camera intrinsics", e <= tol::kIntrinsics,
         fmt("fx=%.4f fy=%.4f cx=%.1f cy=%.1f max_err=%.2e", k.fx, k.fy, k.cx, k.cy, e));
}

void esdf_exact() {
  Rng rng(1001);
  int mismatched = 0;
  const auto t0 = clk::now();
  for (int i = 0; i < tol::kEsdfGrids; ++i) {
    ProjectedGrid2D g(64, 64, 0.2, Vec2(-6.4, -6.4), CellState::free);
    const double density = 0.02 + 0.4 * rng.uniform();
    for (auto& c : g.cells) {
      const double u = rng.uniform();
      c = u < density ? CellState::occupied : (u < density + 0.1 ? CellState::unknown : CellState::free);
    }
    const auto unknown_is = i % 2 ? CellState::occupied : CellState::free;
    const auto e = compute_esdf(g, unknown_is, 5.0);
    mismatched += e.distance != oracle::brute_force_esdf(g, unknown_is, 5.0);
  }
  const double s = since(t0);
  report(2, "ESDF equals brute force", mismatched == 0 && s < tol::kEsdfBudgetS,
         fmt("%d/%d grids exact, %.2f s (budget %.0f s)", tol::kEsdfGrids - mismatched, tol::kEsdfGrids, s,
             tol::kEsdfBudgetS));
}

void jps_optimal() {
  Rng rng(2002);
  int cost_bad = 0, reach_bad = 0, reachable = 0;
  const auto t0 = clk::now();
  for (int i = 0; i < tol::kJpsGrids; ++i) {
    PlanningGrid g(100, 100, 0.2, Vec2::Zero());
    for (auto& b : g.blocked) b = rng.uniform() < tol::kJpsDensity ? 1 : 0;
    auto pick = [&] {
      while (true) {
        const int x = static_cast<int>(rng.uniform() * 100), y = static_cast<int>(rng.uniform() * 100);
        if (g.passable(x, y)) return std::array<int, 2>{x, y};
      }
    };
    const auto s = pick(), t = pick();
    const auto ref = oracle::dijkstra_8(g, s, t);
    const auto got = jps_search(g, s, t);
    if (ref.has_value() != got.has_value()) {
      ++reach_bad;
      continue;
    }
    if (!ref) continue;
    ++reachable;
    cost_bad += !(oracle::path_octile_cost(got->cells) == *ref);
  }
  const double s = since(t0);
  report(3, "JPS cost equals Dijkstra", cost_bad == 0 && reach_bad == 0 && s < tol::kJpsBudgetS,
         fmt("%d grids, %d reachable, cost mismatches %d, reachability mismatches %d, %.2f s", tol::kJpsGrids,
             reachable, cost_bad, reach_bad, s));
}

void primitive_optimal() {
  Rng rng(3003);
  double worst_rel = 0.0, worst_bc = 0.0;
  for (int i = 0; i < tol::kPrimitiveCases; ++i) {
    const Vec3 p0 = rng.normal3(2.0), v0 = rng.normal3(0.6), p1 = rng.normal3(2.0), v1 = rng.normal3(0.6);
    const double T = 0.3 + 5.0 * rng.uniform();
    const auto m = min_acc_primitive(p0, v0, p1, v1, T);
    const double qp = oracle::discretized_min_acc_cost(p0, v0, p1, v1, T, 100);
    worst_rel = std::max(worst_rel, std::abs(m.cost() - qp) / std::max(qp, 1e-12));
    worst_bc = std::max({worst_bc, (m.position_at(0) - p0).norm(), (m.velocity_at(0) - v0).norm(),
                         (m.end_position() - p1).norm(), (m.end_velocity() - v1).norm()});
  }
  report(4, "min-acceleration primitive", worst_rel <= tol::kPrimitiveRel && worst_bc <= tol::kBoundary,
         fmt("%d cases, worst cost rel err %.2e (tol %.0e), worst boundary err %.2e", tol::kPrimitiveCases, worst_rel,
             tol::kPrimitiveRel, worst_bc));
}

void dynamics_invariants() {
  VehicleParams vp;
  const double dt = 1.0 / 400.0;
  RigidBodyState s;
  s.position = Vec3(0, 0, 100);
  s.velocity = Vec3(1.0, -0.5, 3.0);
  s.body_rate = Vec3(0.3, -0.2, 0.5);
  const double e0 = mechanical_energy(s, vp);
  for (int i = 0; i < 4000; ++i) s = step_dynamics(s, BodyWrench{}, vp, dt);
  const double rel = std::abs(mechanical_energy(s, vp) - e0) / std::abs(e0);
  RigidBodyState h;
  h.position = Vec3(0, 0, 1);
  BodyWrench w;
  w.force = Vec3(0, 0, vp.mass * vp.gravity);
  for (int i = 0; i < 4000; ++i) h = step_dynamics(h, w, vp, dt);
  const double drift = (h.position - Vec3(0, 0, 1)).norm();
  report(5, "energy and hover (10 s)", rel <= tol::kEnergyRel && drift < tol::kHoverDrift,
         fmt("energy rel drift %.2e, hover drift %.2e m", rel, drift));
}

void imu_statistics() {
  ImuParams p{0.002, 0.02, 2e-5, 2e-4};
  const double dt = 0.005;
  RigidBodyState s;
  ImuBiasState bias0;
  Rng rng(4004);
  ImuParams white = p;
  white.sigma_accel_bias = white.sigma_gyro_bias = 0.0;
  double sa = 0.0, sg = 0.0;
  constexpr int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const auto m = sample_imu(s, Vec3::Zero(), white, bias0, rng, dt, 9.81);
    sa += std::pow(m.accel.x(), 2);
    sg += std::pow(m.gyro.z(), 2);
  }
  const double ea = std::abs(std::sqrt(sa / n) / p.sigma_accel - 1.0);
  const double eg = std::abs(std::sqrt(sg / n) / p.sigma_gyro - 1.0);
  // Bias random walk: variance after k steps is sigma^2 * k * dt.
  constexpr int walks = 20000, steps = 200;
  std::vector<double> va(steps, 0.0), vg(steps, 0.0);
  for (int wk = 0; wk < walks; ++wk) {
    ImuBiasState b;
    Rng r = Rng::stream(4005, static_cast<std::uint64_t>(wk));
    for (int k = 0; k < steps; ++k) {
      sample_imu(s, Vec3::Zero(), p, b, r, dt, 9.81);
      va[k] += b.accel.squaredNorm() / 3.0;
      vg[k] += b.gyro.squaredNorm() / 3.0;
    }
  }
  double eb = 0.0;
  for (int k : {9, 49, 99, 199}) {
    eb = std::max(eb, std::abs(va[k] / walks / (p.sigma_accel_bias * p.sigma_accel_bias * (k + 1) * dt) - 1.0));
    eb = std::max(eb, std::abs(vg[k] / walks / (p.sigma_gyro_bias * p.sigma_gyro_bias * (k + 1) * dt) - 1.0));
  }
  report(6, "IMU noise statistics", ea <= tol::kImuStdRel && eg <= tol::kImuStdRel && eb <= tol::kBiasVarRel,
         fmt("1e6-sample std err accel %.2f%% gyro %.2f%%; bias variance worst err %.2f%%", 100 * ea, 100 * eg,
             100 * eb));
}

void click_and_fly() {
  const auto cfg = default_config();
  const auto script = scenario("click_and_fly.json");
  const auto t0 = clk::now();
  const auto r = run_captured(cfg, load_scenario_world(script), script);
  const double wall = since(t0);
  const auto& m = r.live;
  const double floor_clear = cfg.inflation_radius - cfg.voxel_size;
  const bool ok = r.verdict == Verdict::success && m.goals_reached == script.goal_count() &&
                  m.goal_errors.size() == script.goal_count() && m.max_goal_error <= tol::kReach &&
                  m.max_speed <= tol::kSpeed && m.min_clearance >= floor_clear && wall < tol::kClickBudgetS;
  std::ostringstream errs;
  for (double e : m.goal_errors) errs << fmt("%.2f ", e);
  report(7, "click-and-fly, 6 waypoints", ok,
         fmt("%s, reached %zu/%zu, goal err [%s] m, max speed %.3f, min clearance %.3f (floor %.2f), %.1f s sim, "
             "%.1f s wall",
             m.verdict.c_str(), m.goals_reached, script.goal_count(), errs.str().c_str(), m.max_speed,
             m.min_clearance, floor_clear, m.sim_duration, wall));
}

struct SurveyRun {
  CapturedRun run;
  double wall = 0.0;
};

SurveyRun survey_run() {
  const auto script = scenario("survey.json");
  SurveyRun s;
  const auto t0 = clk::now();
  s.run = run_captured(default_config(), load_scenario_world(script), script);
  s.wall = since(t0);
  return s;
}

void ate(const SurveyRun& s) {
  const auto cfg = default_config();
  const auto script = scenario("survey.json");
  const auto log = parse_log(s.run.text);
  const Pose p0{script.initial_position, quat_from_yaw(script.initial_yaw)};
  double sum = 0.0, lo = 1e9, hi = 0.0;
  for (int seed = 1; seed <= tol::kAteSeeds; ++seed) {
    const double a = replay_ate(log.ground_truth, cfg, static_cast<std::uint64_t>(seed), p0);
    sum += a;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  const double mean = sum / tol::kAteSeeds;
  SimConfig ideal = cfg;
  ideal.imu = ImuParams{0, 0, 0, 0};
  ideal.estimator.vio = VioNoiseModel{0, 0, 0, static_cast<double>(cfg.camera_hz)};
  const double zero = replay_ate(log.ground_truth, ideal, 1, p0);
  report(8, "ATE over the survey", mean >= tol::kAteLow && mean <= tol::kAteHigh && zero < tol::kAteZeroNoise,
         fmt("%.1f m flown; mean %.3f m over %d seeds (min %.3f, max %.3f); live %.3f; zero-noise %.2e",
             s.run.live.distance_traveled, mean, tol::kAteSeeds, lo, hi, s.run.live.ate_rmse, zero));
}

void map_quality(const SurveyRun& s) {
  const auto cfg = default_config();
  const auto log = parse_log(s.run.text);
  const auto world = world_from_header(log.header);
  const auto f = map_fidelity(grid_from_record(log.maps.back()), world, cfg.mapping.projection, tol::kDilationCells);
  report(9, "map fidelity after the survey",
         f.false_rate() < tol::kFalseOccupied && f.surface_recall() >= tol::kSurfaceRecall,
         fmt("false-occupied beyond %d-cell dilation %zu/%zu = %.2f%%; surface recall %zu/%zu = %.1f%%; "
             "strict (no dilation) %.2f%%",
             tol::kDilationCells, f.false_outside_band, f.free_outside_band, 100 * f.false_rate(), f.surface_matched,
             f.surface_seen, 100 * f.surface_recall(), 100 * f.strict_false_rate()));
}

void determinism(const SurveyRun& s) {
  const auto again = survey_run();
  const bool same_bytes = again.run.text == s.run.text;
  const bool same_metrics = compute_metrics(parse_log(s.run.text)) == s.run.live;
  report(10, "determinism and replay", same_bytes && same_metrics,
         fmt("logs %s (%zu bytes), replayed metrics %s live", same_bytes ? "byte-identical" : "DIFFER",
             s.run.text.size(), same_metrics ? "equal" : "DIFFER from"));
}

void timings(const SurveyRun& s) {
  const auto& t = s.run.timings;
  const double rtf = real_time_factor(s.run.sim_time, s.wall);
  auto ms = [](const StageTiming& st) { return st.mean_ms(); };
  report(11, "real-time factor and stage timings", std::isfinite(rtf),
         fmt("RTF %.1fx (survey); mean ms: render %.3f, mapping %.3f, esdf %.3f, global %.3f, local %.3f, tick %.3f",
             rtf, ms(t.render), ms(t.mapping_integration), ms(t.esdf), ms(t.global_plan), ms(t.local_plan),
             ms(t.tick)));
}

}  // namespace

int main() {
  try {
    camera_intrinsics();
    esdf_exact();
    jps_optimal();
    primitive_optimal();
    dynamics_invariants();
    imu_statistics();
    click_and_fly();
    const auto survey = survey_run();
    ate(survey);
    map_quality(survey);
    determinism(survey);
    timings(survey);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d failing\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
