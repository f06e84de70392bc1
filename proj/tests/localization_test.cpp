#include "navsim/localization.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace navsim;

namespace {

Trajectory line(int n, double dt, const Vec3& offset = Vec3::Zero(), double yaw = 0.0) {
  Trajectory t;
  for (int i = 0; i < n; ++i) {
    const Vec3 p(0.5 * i, 0.1 * i * i * 0.01, 1.0);
    t.push_back({i * dt, Pose{quat_from_yaw(yaw) * p + offset, quat_from_yaw(yaw)}});
  }
  return t;
}

}  // namespace

TEST(Strapdown, ConstantAccelerationIsExact) {
  OdometryEstimate e;
  e.pose.position = Vec3(0, 0, 1);
  ImuSample s;
  s.accel = Vec3(1.0, 0.0, 9.81);  // 1 m/s^2 forward at level attitude
  for (int i = 1; i <= 200; ++i) {
    s.timestamp = i * 0.005;
    e = propagate_imu(e, s, 9.81);
  }
  EXPECT_NEAR(e.pose.position.x(), 0.5, 1e-12);
  EXPECT_NEAR(e.velocity.x(), 1.0, 1e-12);
  EXPECT_NEAR(e.pose.position.z(), 1.0, 1e-12);
}

TEST(Strapdown, ConstantYawRateIntegrates) {
  OdometryEstimate e;
  ImuSample s;
  s.gyro = Vec3(0, 0, 0.5);
  s.accel = Vec3(0, 0, 9.81);
  for (int i = 1; i <= 400; ++i) {
    s.timestamp = i * 0.005;
    e = propagate_imu(e, s, 9.81);
  }
  EXPECT_NEAR(yaw_of(e.pose.orientation), 1.0, 1e-9);
  EXPECT_LT(e.pose.position.norm(), 1e-12);
}

TEST(Strapdown, RejectsOutOfOrderSample) {
  OdometryEstimate e;
  e.timestamp = 1.0;
  ImuSample s;
  s.timestamp = 1.0;
  EXPECT_THROW(propagate_imu(e, s, 9.81), DomainError);
}

TEST(Fuse, GainEndpoints) {
  OdometryEstimate p;
  p.pose.position = Vec3(1, 0, 0);
  const Pose fix{Vec3(2, 0, 0), quat_from_yaw(0.4)};
  EXPECT_EQ(fuse(p, fix, 0.0).pose.position, p.pose.position);
  const auto full = fuse(p, fix, 1.0);
  EXPECT_EQ(full.pose.position, fix.position);
  EXPECT_NEAR(yaw_of(full.pose.orientation), 0.4, 1e-12);
  EXPECT_NEAR(fuse(p, fix, 0.5).pose.position.x(), 1.5, 1e-15);
  EXPECT_THROW(fuse(p, fix, 1.5), DomainError);
}

TEST(VisionFix, ZeroModelReturnsTruth) {
  VioDriftState d;
  Rng rng(1);
  const Pose gt{Vec3(1, 2, 3), quat_from_yaw(0.3)};
  const Pose f = vision_fix(gt, VioNoiseModel{}, d, rng);
  EXPECT_EQ(f.position, gt.position);
}

TEST(VisionFix, DriftGrowsWithDistanceNotTime) {
  VioNoiseModel m;
  m.drift_rate_sigma = 0.05;
  VioDriftState d;
  Rng rng(5);
  const Pose still{Vec3(0, 0, 1), Quat::Identity()};
  for (int i = 0; i < 1000; ++i) vision_fix(still, m, d, rng);
  EXPECT_EQ(d.offset, Vec3::Zero());
  EXPECT_EQ(d.distance, 0.0);
  for (int i = 1; i <= 100; ++i) vision_fix(Pose{Vec3(0.1 * i, 0, 1), Quat::Identity()}, m, d, rng);
  EXPECT_NEAR(d.distance, 10.0, 1e-9);
  EXPECT_GT(d.offset.norm(), 0.0);
}

TEST(Estimator, ZeroNoiseTracksTruthExactly) {
  VioEstimator est(EstimatorParams{}, 9.81, Rng(1));
  const Pose p0{Vec3(0, 0, 1), Quat::Identity()};
  est.initialize(p0, Vec3::Zero(), 0.0);
  ImuSample s;
  s.accel = Vec3(0, 0, 9.81);
  s.timestamp = 0.005;
  est.on_imu(s);
  const Pose truth{Vec3(0.01, 0, 1), Quat::Identity()};
  const Pose fix = est.on_vision(truth, 0.005);
  EXPECT_EQ(fix.position, truth.position);
  EXPECT_EQ(est.estimate().pose.position, truth.position);
}

TEST(Ate, IdenticalTrajectoriesAreZero) {
  const auto t = line(50, 0.1);
  EXPECT_EQ(compute_ate_rmse({t, t}), 0.0);
}

TEST(Ate, ConstantOffsetWithoutAlignment) {
  const auto gt = line(50, 0.1);
  const auto est = line(50, 0.1, Vec3(0.3, 0.4, 0.0));
  EXPECT_NEAR(compute_ate_rmse({est, gt}), 0.5, 1e-12);
  EXPECT_NEAR(compute_ate_rmse({est, gt}, Alignment::full_se3), 0.0, 1e-9);
}

TEST(Ate, YawAlignmentRemovesRotation) {
  const auto gt = line(50, 0.1);
  const auto est = line(50, 0.1, Vec3(1.0, -2.0, 0.0), 0.7);
  EXPECT_GT(compute_ate_rmse({est, gt}), 0.5);
  EXPECT_NEAR(compute_ate_rmse({est, gt}, Alignment::yaw_xy), 0.0, 1e-9);
}

TEST(Ate, AssociationFailures) {
  const auto gt = line(10, 0.1);
  auto far = line(10, 0.1);
  for (auto& p : far) p.timestamp += 100.0;
  EXPECT_THROW(compute_ate_rmse({far, gt}), AssociationError);
  EXPECT_THROW(compute_ate_rmse({Trajectory{gt[0]}, gt}), DomainError);
}

TEST(Tum, RoundTrip) {
  const auto t = line(5, 0.25, Vec3(0.1, 0.2, 0.3), 0.2);
  std::stringstream ss;
  write_tum(ss, t);
  const auto back = read_tum(ss);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back[i].timestamp, t[i].timestamp);
    EXPECT_EQ(back[i].pose.position, t[i].pose.position);
  }
  std::stringstream bad("0.0 1 2 3\n");
  EXPECT_THROW(read_tum(bad), ParseError);
}
