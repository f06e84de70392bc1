#include "navsim/dynamics.hpp"

#include <gtest/gtest.h>

using namespace navsim;

namespace {

constexpr double kDt = 1.0 / 400.0;

RigidBodyState hover_state(const Vec3& p = Vec3(0, 0, 1)) {
  RigidBodyState s;
  s.position = p;
  return s;
}

}  // namespace

TEST(Dynamics, ConstantThrustLevelAttitude) {
  VehicleParams vp;
  RigidBodyState s = hover_state(Vec3::Zero());
  BodyWrench w;
  w.force = Vec3(0, 0, vp.mass * (vp.gravity + 1.0));
  for (int i = 0; i < 400; ++i) s = step_dynamics(s, w, vp, kDt);
  EXPECT_NEAR(s.position.z(), 0.5, 1e-9);
  EXPECT_NEAR(s.velocity.z(), 1.0, 1e-9);
}

TEST(Dynamics, HoverStaysPut) {
  VehicleParams vp;
  RigidBodyState s = hover_state();
  BodyWrench w;
  w.force = Vec3(0, 0, vp.mass * vp.gravity);
  for (int i = 0; i < 4000; ++i) s = step_dynamics(s, w, vp, kDt);
  EXPECT_LT((s.position - Vec3(0, 0, 1)).norm(), 1e-6);
}

TEST(Dynamics, ForceFreeEnergyConserved) {
  VehicleParams vp;
  RigidBodyState s = hover_state(Vec3(0, 0, 100));
  s.velocity = Vec3(1.0, -0.5, 3.0);
  s.body_rate = Vec3(0.3, -0.2, 0.5);
  const double e0 = mechanical_energy(s, vp);
  for (int i = 0; i < 4000; ++i) s = step_dynamics(s, BodyWrench{}, vp, kDt);
  EXPECT_LT(std::abs(mechanical_energy(s, vp) - e0) / std::abs(e0), 1e-6);
}

TEST(Dynamics, RejectsBadStep) {
  EXPECT_THROW(step_dynamics(hover_state(), BodyWrench{}, VehicleParams{}, 0.0), DomainError);
  EXPECT_THROW(step_dynamics(hover_state(), BodyWrench{}, VehicleParams{}, 0.02), DomainError);
}

TEST(Dynamics, DivergenceIsReported) {
  BodyWrench w;
  w.force = Vec3(0, 0, std::numeric_limits<double>::infinity());
  EXPECT_THROW(step_dynamics(hover_state(), w, VehicleParams{}, kDt), IntegrationDivergence);
}

TEST(Controller, SpeedClampFlagsSaturation) {
  bool clamped = false;
  const Vec3 v = CascadeController::clamp_speed(Vec3(2, 0, 0), 1.0, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_DOUBLE_EQ(v.x(), 1.0);
  clamped = false;
  CascadeController::clamp_speed(Vec3(0.5, 0, 0), 1.0, &clamped);
  EXPECT_FALSE(clamped);
}

TEST(Controller, TwoMeterStepResponse) {
  VehicleParams vp;
  CascadeController c(vp, ControllerGains{}, 1.0);
  RigidBodyState s = hover_state();
  Setpoint sp;
  sp.kind = Setpoint::Kind::position;
  sp.value = Vec3(2, 0, 1);
  double max_speed = 0.0;
  double overshoot = 0.0;
  double settle = -1.0;
  for (int i = 0; i < 400 * 15; ++i) {
    const BodyWrench w = c.compute(s, s, sp, kDt);
    s = step_dynamics(s, w, vp, kDt);
    max_speed = std::max(max_speed, s.velocity.norm());
    overshoot = std::max(overshoot, s.position.x() - 2.0);
    const bool inside = (s.position - sp.value).norm() < 0.05;
    if (inside && settle < 0.0) settle = (i + 1) * kDt;
    if (!inside) settle = -1.0;
  }
  EXPECT_LE(max_speed, 1.0 + 0.05);  // speed clamp on the setpoint, small dynamic overshoot
  EXPECT_LT(overshoot, 0.1);
  ASSERT_GT(settle, 0.0);
  EXPECT_LT(settle, 6.0);
}

TEST(Controller, LargeYawChangeKeepsAltitude) {
  VehicleParams vp;
  CascadeController c(vp, ControllerGains{}, 1.0);
  RigidBodyState s = hover_state();
  Setpoint sp;
  sp.kind = Setpoint::Kind::velocity;
  sp.value = Vec3(0.5, 0.0, 0.0);
  sp.yaw = 0.0;
  for (int i = 0; i < 800; ++i) s = step_dynamics(s, c.compute(s, s, sp, kDt), vp, kDt);
  sp.value = Vec3(-0.5, 0.2, 0.0);
  sp.yaw = 3.0;
  double min_z = s.position.z();
  for (int i = 0; i < 2000; ++i) {
    s = step_dynamics(s, c.compute(s, s, sp, kDt), vp, kDt);
    min_z = std::min(min_z, s.position.z());
  }
  EXPECT_GT(min_z, 0.9);
  EXPECT_NEAR(wrap_angle(yaw_of(s.attitude) - 3.0), 0.0, 0.05);
  EXPECT_LT((s.velocity - sp.value).norm(), 0.05);
}

TEST(Controller, AttitudeFromZYaw) {
  const Quat q = CascadeController::attitude_from_z_yaw(Vec3::UnitZ(), 0.7);
  EXPECT_NEAR(yaw_of(q), 0.7, 1e-12);
  const Vec3 z = Vec3(0.2, 0.1, 1.0).normalized();
  const Quat q2 = CascadeController::attitude_from_z_yaw(z, -1.0);
  EXPECT_LT((q2 * Vec3::UnitZ() - z).norm(), 1e-12);
}

TEST(CommandLatch, StaleFallsBackToHold) {
  CommandLatch latch(0.5);
  latch.initialize(Vec3(0, 0, 1), 0.0);
  Setpoint sp;
  sp.kind = Setpoint::Kind::velocity;
  sp.value = Vec3(1, 0, 0);
  latch.submit(sp, 1.0);
  EXPECT_EQ(latch.active(1.2, Vec3(0.2, 0, 1), 0.0).kind, Setpoint::Kind::velocity);
  EXPECT_FALSE(latch.stale());
  const Setpoint held = latch.active(1.6, Vec3(0.6, 0, 1), 0.1);
  EXPECT_TRUE(latch.stale());
  EXPECT_EQ(held.kind, Setpoint::Kind::position);
  EXPECT_DOUBLE_EQ(held.value.x(), 0.6);
  // The hold point does not follow the vehicle once latched.
  EXPECT_DOUBLE_EQ(latch.active(2.0, Vec3(0.9, 0, 1), 0.1).value.x(), 0.6);
}
