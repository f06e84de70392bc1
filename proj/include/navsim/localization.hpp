#pragma once

#include "navsim/common.hpp"
#include "navsim/sensors.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace navsim {

struct OdometryEstimate {
  enum class Source { imu_propagated, vision_corrected };
  Pose pose;
  Vec3 velocity = Vec3::Zero();
  double timestamp = 0.0;
  Source source = Source::imu_propagated;
};

/// Statistical stand-in for a stereo visual-inertial estimator's vision-rate
/// output: a random-walk position drift that grows with distance traveled,
/// plus white position and yaw noise per fix.
struct VioNoiseModel {
  double fix_position_sigma = 0.0;  // m
  double fix_yaw_sigma = 0.0;       // rad
  double drift_rate_sigma = 0.0;    // m per sqrt(m) traveled, per axis
  double fix_rate = 30.0;           // Hz

  bool zero() const { return fix_position_sigma == 0.0 && fix_yaw_sigma == 0.0 && drift_rate_sigma == 0.0; }
};

struct VioDriftState {
  Vec3 offset = Vec3::Zero();
  Vec3 last_position = Vec3::Zero();
  bool initialized = false;
  double distance = 0.0;
};

/// Strapdown step from prev.timestamp to sample.timestamp: the specific force
/// is rotated to the inertial frame and gravity restored, then velocity and
/// position are integrated; attitude advances by the measured body rate.
inline OdometryEstimate propagate_imu(const OdometryEstimate& prev, const ImuSample& sample, double gravity) {
  const double dt = sample.timestamp - prev.timestamp;
  if (!(dt > 0.0)) throw DomainError("propagate_imu: sample must be newer than the estimate");
  OdometryEstimate out;
  out.timestamp = sample.timestamp;
  out.source = OdometryEstimate::Source::imu_propagated;

  const Vec3 dtheta = sample.gyro * dt;
  const double angle = dtheta.norm();
  const Quat dq = angle > 0.0 ? Quat(Eigen::AngleAxisd(angle, dtheta / angle)) : Quat::Identity();
  const Quat q_mid = prev.pose.orientation.slerp(0.5, (prev.pose.orientation * dq).normalized());
  out.pose.orientation = (prev.pose.orientation * dq).normalized();

  const Vec3 acc = q_mid * sample.accel + Vec3(0.0, 0.0, -gravity);
  out.velocity = prev.velocity + acc * dt;
  out.pose.position = prev.pose.position + prev.velocity * dt + 0.5 * acc * dt * dt;
  return out;
}

/// One emulated vision fix for the true pose `gt`.
inline Pose vision_fix(const Pose& gt, const VioNoiseModel& model, VioDriftState& drift, Rng& rng) {
  if (!drift.initialized) {
    drift.last_position = gt.position;
    drift.initialized = true;
  }
  const double ds = (gt.position - drift.last_position).norm();
  drift.last_position = gt.position;
  drift.distance += ds;
  if (model.drift_rate_sigma > 0.0 && ds > 0.0) drift.offset += rng.normal3(model.drift_rate_sigma * std::sqrt(ds));
  if (model.zero()) return gt;

  Pose out;
  out.position = gt.position + drift.offset + rng.normal3(model.fix_position_sigma);
  const double dyaw = rng.normal(model.fix_yaw_sigma);
  out.orientation = (quat_from_yaw(dyaw) * gt.orientation).normalized();
  return out;
}

/// Fixed-gain complementary update. Position and attitude move toward the fix
/// by `gain`; velocity absorbs `gain * velocity_gain` of the position
/// innovation spread over the time since the previous fix.
inline OdometryEstimate fuse(const OdometryEstimate& propagated, const Pose& fix, double gain,
                             double velocity_gain = 0.0, double fix_interval = 0.0) {
  if (!(gain >= 0.0 && gain <= 1.0)) throw DomainError("fuse: gain must lie in [0, 1]");
  OdometryEstimate out = propagated;
  const Vec3 innovation = fix.position - propagated.pose.position;
  out.pose.position = propagated.pose.position + gain * innovation;
  if (gain == 1.0) {
    out.pose.position = fix.position;
    out.pose.orientation = fix.orientation;
  } else if (gain > 0.0) {
    out.pose.orientation = propagated.pose.orientation.slerp(gain, fix.orientation).normalized();
  }
  if (fix_interval > 0.0) out.velocity += gain * velocity_gain * innovation / fix_interval;
  out.source = OdometryEstimate::Source::vision_corrected;
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory evaluation

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;
};

using Trajectory = std::vector<StampedPose>;

struct TrajectoryPair {
  Trajectory estimated;
  Trajectory ground_truth;
};

enum class Alignment { none, yaw_xy, full_se3 };

class AssociationError : public Error {
 public:
  using Error::Error;
};

/// Nearest-timestamp association. Returns index pairs (estimated, truth).
inline std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est, const Trajectory& gt,
                                                                   double tolerance) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    auto it = std::lower_bound(gt.begin(), gt.end(), t,
                               [](const StampedPose& p, double tt) { return p.timestamp < tt; });
    std::size_t best = gt.size();
    double best_dt = tolerance;
    auto consider = [&](std::size_t j) {
      const double d = std::abs(gt[j].timestamp - t);
      if (d <= best_dt) {
        if (best == gt.size() || d < best_dt) best = j;
        best_dt = d;
      }
    };
    if (it != gt.begin()) consider(static_cast<std::size_t>(it - gt.begin()) - 1);
    if (it != gt.end()) consider(static_cast<std::size_t>(it - gt.begin()));
    if (best != gt.size()) out.emplace_back(i, best);
  }
  return out;
}

/// Least-squares rigid transform mapping `src` onto `dst` (columns are points).
/// With `yaw_only`, the rotation is restricted to the z axis.
inline Eigen::Matrix4d rigid_alignment(const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst, bool yaw_only) {
  const Vec3 mu_s = src.rowwise().mean();
  const Vec3 mu_d = dst.rowwise().mean();
  const Eigen::Matrix3Xd s = src.colwise() - mu_s;
  const Eigen::Matrix3Xd d = dst.colwise() - mu_d;
  Mat3 r = Mat3::Identity();
  if (yaw_only) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
      num += s(0, i) * d(1, i) - s(1, i) * d(0, i);
      den += s(0, i) * d(0, i) + s(1, i) * d(1, i);
    }
    r = Eigen::AngleAxisd(std::atan2(num, den), Vec3::UnitZ()).toRotationMatrix();
  } else {
    const Mat3 h = s * d.transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 fix = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) fix(2, 2) = -1.0;
    r = svd.matrixV() * fix * svd.matrixU().transpose();
  }
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.block<3, 3>(0, 0) = r;
  t.block<3, 1>(0, 3) = mu_d - r * mu_s;
  return t;
}

/// Root-mean-square translational error after optional rigid alignment of the
/// estimate onto the truth. Timestamps associate to the nearest truth sample
/// within `tolerance` seconds.
inline double compute_ate_rmse(const TrajectoryPair& pair, Alignment align = Alignment::none,
                               double tolerance = 0.02) {
  if (pair.estimated.size() < 2 || pair.ground_truth.size() < 2)
    throw DomainError("compute_ate_rmse: need at least two poses per trajectory");
  const auto matches = associate(pair.estimated, pair.ground_truth, tolerance);
  if (matches.empty()) throw AssociationError("compute_ate_rmse: no timestamps associate within tolerance");
  Eigen::Matrix3Xd est(3, static_cast<Eigen::Index>(matches.size()));
  Eigen::Matrix3Xd gt(3, static_cast<Eigen::Index>(matches.size()));
  for (std::size_t k = 0; k < matches.size(); ++k) {
    est.col(static_cast<Eigen::Index>(k)) = pair.estimated[matches[k].first].pose.position;
    gt.col(static_cast<Eigen::Index>(k)) = pair.ground_truth[matches[k].second].pose.position;
  }
  if (align != Alignment::none && matches.size() >= 2) {
    const Eigen::Matrix4d t = rigid_alignment(est, gt, align == Alignment::yaw_xy);
    est = (t.block<3, 3>(0, 0) * est).colwise() + Vec3(t.block<3, 1>(0, 3));
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < est.cols(); ++k) sum += (est.col(k) - gt.col(k)).squaredNorm();
  return std::sqrt(sum / static_cast<double>(est.cols()));
}

/// TUM trajectory text: `timestamp x y z qx qy qz qw` per line.
inline void write_tum(std::ostream& os, const Trajectory& traj) {
  os << std::setprecision(17);
  for (const auto& p : traj) {
    const auto& q = p.pose.orientation;
    os << p.timestamp << ' ' << p.pose.position.x() << ' ' << p.pose.position.y() << ' ' << p.pose.position.z() << ' '
       << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

inline Trajectory read_tum(std::istream& is) {
  Trajectory out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    StampedPose p;
    double x, y, z, qx, qy, qz, qw;
    if (!(ls >> p.timestamp >> x >> y >> z >> qx >> qy >> qz >> qw))
      throw ParseError("expected 'timestamp x y z qx qy qz qw'", lineno, "");
    p.pose.position = Vec3(x, y, z);
    p.pose.orientation = Quat(qw, qx, qy, qz);
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimator

struct EstimatorParams {
  VioNoiseModel vio;
  double fuse_gain = 0.6;
  double velocity_gain = 0.08;
};

/// IMU-rate propagation corrected by vision-rate fixes. Owns the drift state
/// and its random stream; one instance per simulated vehicle.
class VioEstimator {
 public:
  VioEstimator(EstimatorParams params, double gravity, Rng rng) : params_(params), gravity_(gravity), rng_(rng) {}

  void initialize(const Pose& pose, const Vec3& velocity, double t) {
    est_.pose = pose;
    est_.velocity = velocity;
    est_.timestamp = t;
    est_.source = OdometryEstimate::Source::vision_corrected;
    drift_ = {};
    last_fix_time_ = t;
    initialized_ = true;
  }

  bool initialized() const { return initialized_; }
  const OdometryEstimate& estimate() const { return est_; }
  const VioDriftState& drift() const { return drift_; }
  const EstimatorParams& params() const { return params_; }

  const OdometryEstimate& on_imu(const ImuSample& s) {
    est_ = propagate_imu(est_, s, gravity_);
    return est_;
  }

  /// Applies a vision fix derived from the true IMU-link pose at time t.
  /// Returns the fix itself (the vision-rate path).
  Pose on_vision(const Pose& true_pose, double t) {
    const Pose fix = vision_fix(true_pose, params_.vio, drift_, rng_);
    const double interval = t - last_fix_time_;
    last_fix_time_ = t;
    const double gain = params_.vio.zero() ? 1.0 : params_.fuse_gain;
    est_ = fuse(est_, fix, gain, params_.velocity_gain, interval);
    est_.timestamp = t;
    return fix;
  }

 private:
  EstimatorParams params_;
  double gravity_;
  Rng rng_;
  OdometryEstimate est_;
  VioDriftState drift_;
  double last_fix_time_ = 0.0;
  bool initialized_ = false;
};

}  // namespace navsim
