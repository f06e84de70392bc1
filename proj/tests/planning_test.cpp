#include "navsim/planning/planner.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace navsim;

namespace {

PlanningGrid random_planning_grid(Rng& rng, int w, int h, double density) {
  PlanningGrid g(w, h, 0.2, Vec2::Zero());
  for (auto& b : g.blocked) b = rng.uniform() < density ? 1 : 0;
  return g;
}

std::array<int, 2> random_free(Rng& rng, const PlanningGrid& g) {
  while (true) {
    const int x = static_cast<int>(rng.uniform() * g.width), y = static_cast<int>(rng.uniform() * g.height);
    if (g.passable(x, y)) return {x, y};
  }
}

LocalGoal goal_at(double x, double y, double z = 1.0) { return {Vec3(x, y, z), std::atan2(y, x)}; }

}  // namespace

// ---------------------------------------------------------------------------
// Grid preprocessing

TEST(Grid, InflationIsAEuclideanDisk) {
  ProjectedGrid2D g(21, 21, 0.2, Vec2::Zero(), CellState::free);
  g.at(10, 10) = CellState::occupied;
  const auto p = preprocess_grid(g, 0.4, CellState::free, {}, 30);
  ASSERT_EQ(p.width, 21);
  int blocked = 0;
  for (auto b : p.blocked) blocked += b;
  EXPECT_EQ(blocked, 13);  // dx^2 + dy^2 <= 4
  EXPECT_FALSE(p.passable(12, 10));
  EXPECT_TRUE(p.passable(12, 11));
}

TEST(Grid, CropsToObservedCellsPlusMargin) {
  ProjectedGrid2D g(50, 50, 0.2, Vec2(-5, -5), CellState::unknown);
  g.at(20, 20) = CellState::free;
  const auto p = preprocess_grid(g, 0.0, CellState::occupied, {g.center_of(25, 22)}, 2);
  EXPECT_EQ(p.width, 25 - 20 + 1 + 4);
  EXPECT_EQ(p.height, 22 - 20 + 1 + 4);
  EXPECT_NEAR(p.origin.x(), -5 + 0.2 * 18, 1e-12);
  ProjectedGrid2D empty(10, 10, 0.2, Vec2::Zero(), CellState::unknown);
  EXPECT_EQ(preprocess_grid(empty, 0.4).width, 0);
}

// ---------------------------------------------------------------------------
// JPS

TEST(Jps, MatchesDijkstraOnRandomGrids) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = random_planning_grid(rng, 40, 40, 0.3);
    const auto s = random_free(rng, g), t = random_free(rng, g);
    const auto ref = oracle::dijkstra_8(g, s, t);
    const auto got = jps_search(g, s, t);
    ASSERT_EQ(ref.has_value(), got.has_value()) << "trial " << trial;
    if (!ref) continue;
    EXPECT_EQ(oracle::path_octile_cost(got->cells), *ref) << "trial " << trial;
    EXPECT_NEAR(got->cost, ref->value(), 1e-9);
  }
}

TEST(Jps, PathSegmentsAreFeasible) {
  Rng rng(5);
  const auto g = random_planning_grid(rng, 30, 30, 0.25);
  const auto s = random_free(rng, g), t = random_free(rng, g);
  const auto p = jps_search(g, s, t);
  if (!p) GTEST_SKIP() << "unreachable draw";
  for (std::size_t i = 1; i < p->cells.size(); ++i) {
    const int dx = p->cells[i][0] - p->cells[i - 1][0], dy = p->cells[i][1] - p->cells[i - 1][1];
    ASSERT_TRUE(dx == 0 || dy == 0 || std::abs(dx) == std::abs(dy));
    const int sx = (dx > 0) - (dx < 0), sy = (dy > 0) - (dy < 0);
    int x = p->cells[i - 1][0], y = p->cells[i - 1][1];
    while (x != p->cells[i][0] || y != p->cells[i][1]) {
      ASSERT_TRUE(can_move(g, x, y, sx, sy));
      x += sx;
      y += sy;
    }
  }
}

TEST(Jps, StartEqualsGoal) {
  PlanningGrid g(5, 5, 0.2, Vec2::Zero());
  const auto p = jps_plan(g, Vec2(0.5, 0.5), Vec2(0.5, 0.5));
  EXPECT_EQ(p.waypoints.size(), 1u);
  EXPECT_EQ(p.length, 0.0);
}

TEST(Jps, ErrorsAndRelocation) {
  PlanningGrid g(10, 10, 0.2, Vec2::Zero());
  for (int y = 0; y < 10; ++y) g.set_blocked(5, y);
  EXPECT_THROW(jps_plan(g, Vec2(0.1, 0.1), Vec2(1.9, 1.9)), NoPathError);
  EXPECT_THROW(jps_plan(g, Vec2(1.1, 0.1), Vec2(0.1, 0.1)), NoPathError);
  EXPECT_THROW(jps_plan(g, Vec2(0.1, 0.1), Vec2(5.0, 5.0)), NoPathError);
  const auto p = jps_plan(g, Vec2(0.1, 0.1), Vec2(1.1, 1.1), 0.5);  // goal on the wall
  EXPECT_TRUE(p.goal_relocated);
  EXPECT_NEAR(p.goal.x(), 0.9, 1e-12);
}

TEST(LocalGoal, BezierTangentAndDegenerateCases) {
  GlobalPath one;
  one.waypoints = {Vec2(1, 1)};
  EXPECT_EQ(bezier_local_goal(one, Vec2(0, 0), 1.0).point, Vec3(1, 1, 1));
  GlobalPath p;
  p.waypoints = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 5)};
  const auto g = bezier_local_goal(p, Vec2(0, 0), 1.2, 1.5);
  EXPECT_NEAR(g.point.x(), 1.5, 1e-12);
  EXPECT_NEAR(g.point.y(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(g.point.z(), 1.2);
  GlobalPath shorty;
  shorty.waypoints = {Vec2(0, 0), Vec2(0, 0.5)};
  EXPECT_NEAR(bezier_local_goal(shorty, Vec2(0, 0), 1.0, 1.5).point.y(), 0.5, 1e-12);
  EXPECT_THROW(bezier_local_goal(GlobalPath{}, Vec2(0, 0), 1.0), DomainError);
}

// ---------------------------------------------------------------------------
// HAS

TEST(Has, CandidateOrder) {
  HasParams p;
  p.step_deg = 10;
  p.max_offset_deg = 20;
  const auto c = has_candidates(p);
  ASSERT_EQ(c.size(), 15u);
  EXPECT_EQ(c[0].offset, 0.0);
  EXPECT_GT(c[1].offset, 0.0);
  EXPECT_LT(c[2].offset, 0.0);
  EXPECT_GT(c[5].tier, 0.0);
  EXPECT_LT(c[10].tier, 0.0);
}

TEST(Has, EmptyMapGoesStraightToBearing) {
  const Pose vehicle{Vec3(0, 0, 1), Quat::Identity()};
  const LocalCylindricalMap local(LocalMapParams{}, vehicle);
  const auto r = heuristic_angular_search(local, nullptr, vehicle.position, goal_at(5, 5));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->candidate.offset, 0.0);
  EXPECT_NEAR(r->waypoint.head<2>().norm(), 1.0, 1e-12);
  EXPECT_NEAR(std::atan2(r->waypoint.y(), r->waypoint.x()), kPi / 4, 1e-12);
}

TEST(Has, ObstacleAheadDeflects) {
  const Pose vehicle{Vec3(0, 0, 1), Quat::Identity()};
  std::vector<Vec3> wall;
  for (double y = -0.5; y <= 0.5; y += 0.05)
    for (double z = 0.2; z <= 1.8; z += 0.2) wall.emplace_back(1.0, y, z);
  const auto local = rebuild_local_map(wall, vehicle);
  const auto r = heuristic_angular_search(local, nullptr, vehicle.position, goal_at(5, 0));
  ASSERT_TRUE(r);
  EXPECT_NE(r->candidate.offset, 0.0);
  EXPECT_GT(r->evaluated, 1u);
}

TEST(Has, EnclosedVehicleFindsNothing) {
  const Pose vehicle{Vec3(0, 0, 1), Quat::Identity()};
  std::vector<Vec3> ring;
  for (int i = 0; i < 360; ++i)
    for (double z = -0.2; z <= 2.6; z += 0.1)
      ring.emplace_back(0.7 * std::cos(deg2rad(i)), 0.7 * std::sin(deg2rad(i)), z);
  const auto local = rebuild_local_map(ring, vehicle);
  EXPECT_FALSE(heuristic_angular_search(local, nullptr, vehicle.position, goal_at(5, 0)));
}

// ---------------------------------------------------------------------------
// Primitives

TEST(Primitive, MatchesDiscretizedQp) {
  Rng rng(31);
  for (int i = 0; i < 10; ++i) {
    const Vec3 p0 = rng.normal3(2.0), v0 = rng.normal3(0.5), p1 = rng.normal3(2.0), v1 = rng.normal3(0.5);
    const double T = 0.5 + 4.0 * rng.uniform();
    const auto m = min_acc_primitive(p0, v0, p1, v1, T);
    const double qp = oracle::discretized_min_acc_cost(p0, v0, p1, v1, T);
    EXPECT_LT(std::abs(m.cost() - qp) / std::max(qp, 1e-12), 1e-4);
    EXPECT_LT(std::abs(oracle::quadrature_cost(m) - m.cost()) / std::max(m.cost(), 1e-12), 1e-9);
    EXPECT_LT((m.position_at(0) - p0).norm(), 1e-9);
    EXPECT_LT((m.velocity_at(0) - v0).norm(), 1e-9);
    EXPECT_LT((m.end_position() - p1).norm(), 1e-9);
    EXPECT_LT((m.end_velocity() - v1).norm(), 1e-9);
  }
}

TEST(Primitive, RestToRestAtSamePointIsZero) {
  const auto m = min_acc_primitive(Vec3(1, 2, 3), Vec3::Zero(), Vec3(1, 2, 3), Vec3::Zero(), 2.0);
  EXPECT_EQ(m.cost(), 0.0);
  EXPECT_EQ(m.position(1.0), Vec3(1, 2, 3));
}

TEST(Primitive, DegenerateDuration) {
  EXPECT_THROW(min_acc_primitive(Vec3::Zero(), Vec3::Zero(), Vec3::Ones(), Vec3::Zero(), 0.0), DegenerateDurationError);
  EXPECT_THROW(min_acc_primitive(Vec3::Zero(), Vec3::Zero(), Vec3::Ones(), Vec3::Zero(), 0.1, 0.0, 0.3),
               DegenerateDurationError);
}

TEST(Primitive, FeasibleRespectsSpeedLimit) {
  PrimitiveLimits lim;
  const auto m = feasible_primitive(Vec3::Zero(), Vec3(0.8, 0, 0), Vec3(0, 1, 0), Vec3(0, 0.6, 0), lim);
  EXPECT_LE(m.max_speed(), lim.max_speed + 1e-9);
}

TEST(Primitive, BackupStopsAtHalfTheTravel) {
  const auto m = backup_primitive(Vec3::Zero(), Vec3(0.9, 0, 0), 1.5);
  EXPECT_NEAR(m.duration, 0.6, 1e-12);
  EXPECT_LT(m.end_velocity().norm(), 1e-12);
  EXPECT_NEAR(m.end_position().x(), 0.27, 1e-12);
  // Velocity decays linearly.
  EXPECT_NEAR(m.velocity_at(0.3).x(), 0.45, 1e-12);
}

// ---------------------------------------------------------------------------
// Planners

TEST(GlobalPlanner, RoutesAroundAWall) {
  ProjectedGrid2D g(60, 60, 0.2, Vec2(-6, -6), CellState::free);
  for (int y = 10; y < 60; ++y) g.at(30, y) = CellState::occupied;
  PlannerParams p;
  const GlobalPlanner gp(p);
  const auto out = gp.plan(g, Vec2(-3, 3), Vec2(3, 3));
  ASSERT_TRUE(out.path) << out.error;
  EXPECT_EQ(out.path->waypoints.front(), Vec2(-3, 3));
  EXPECT_EQ(out.path->waypoints.back(), Vec2(3, 3));
  double min_y = 1e9;
  for (const auto& w : out.path->waypoints) min_y = std::min(min_y, w.y());
  EXPECT_LT(min_y, -6 + 0.2 * 10);
  ASSERT_TRUE(out.local_goal);
}

TEST(GlobalPlanner, ReportsUnreachableGoal) {
  ProjectedGrid2D g(40, 40, 0.2, Vec2::Zero(), CellState::free);
  for (int y = 0; y < 40; ++y) g.at(20, y) = CellState::occupied;
  const GlobalPlanner gp(PlannerParams{});
  const auto out = gp.plan(g, Vec2(1, 4), Vec2(7, 4));
  EXPECT_FALSE(out.path);
  EXPECT_FALSE(out.error.empty());
}

TEST(LocalPlanner, CommandsNeverExceedTheLimit) {
  PlannerParams p;
  LocalPlanner lp(p);
  const Pose vehicle{Vec3(0, 0, 1), Quat::Identity()};
  const LocalCylindricalMap local(LocalMapParams{}, vehicle);
  EXPECT_FALSE(lp.command(0.0, 0.01, vehicle.position, 0.0, 1.0));
  const auto step = lp.update(0.0, vehicle.position, Vec3(0.8, 0.0, 0.0), local, nullptr, goal_at(5, 0), false);
  EXPECT_EQ(step.status, LocalPlanner::Status::tracking);
  for (int i = 0; i < 200; ++i) {
    const auto sp = lp.command(0.01 * i, 0.01, Vec3(-0.5, 0.3, 1.0), 0.0, 1.0);
    ASSERT_TRUE(sp);
    EXPECT_LE(sp->value.norm(), 1.0 + 1e-12);
  }
}

TEST(LocalPlanner, EnclosedTriggersBackup) {
  PlannerParams p;
  LocalPlanner lp(p);
  const Pose vehicle{Vec3(0, 0, 1), Quat::Identity()};
  std::vector<Vec3> ring;
  for (int i = 0; i < 360; ++i)
    for (double z = -0.2; z <= 2.6; z += 0.1) ring.emplace_back(0.7 * std::cos(deg2rad(i)), 0.7 * std::sin(deg2rad(i)), z);
  const auto local = rebuild_local_map(ring, vehicle);
  const auto step = lp.update(0.0, vehicle.position, Vec3(0.5, 0, 0), local, nullptr, goal_at(5, 0), false);
  EXPECT_EQ(step.status, LocalPlanner::Status::backup);
  ASSERT_TRUE(lp.active());
  EXPECT_LT(lp.active()->end_velocity().norm(), 1e-12);
}
