#pragma once

#include "navsim/common.hpp"

namespace navsim {

/// Vehicle state: position and velocity in the inertial frame, attitude as the
/// body -> inertial rotation, angular rate in the body frame.
struct RigidBodyState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  Vec3 body_rate = Vec3::Zero();

  bool finite() const {
    return position.allFinite() && velocity.allFinite() && attitude.coeffs().allFinite() &&
           body_rate.allFinite();
  }

  Pose pose() const { return {position, attitude}; }
};

}  // namespace navsim
