#pragma once

#include "navsim/common.hpp"
#include "navsim/state.hpp"
#include "navsim/world.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace navsim {

// ---------------------------------------------------------------------------
// Camera

/// Pinhole intrinsics; focal length follows from the horizontal field of view.
struct CameraIntrinsics {
  int width = 640;
  int height = 360;
  double hfov = 1.5;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Pixel coordinates of a camera-frame point (z forward, x right, y down).
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
};

inline CameraIntrinsics intrinsics_from_fov(int width, int height, double hfov) {
  if (width < 1 || height < 1) throw DomainError("intrinsics_from_fov: width and height must be >= 1");
  if (!(hfov > 0.0 && hfov < kPi)) throw DomainError("intrinsics_from_fov: hfov must lie in (0, pi)");
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.hfov = hfov;
  k.fx = k.fy = width / (2.0 * std::tan(hfov / 2.0));
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  return k;
}

/// Mounting of the stereo pair. `right_to_left` maps right-camera coordinates
/// into the left camera; `left_to_imu` maps left-camera coordinates into the
/// IMU frame (x forward, y left, z up).
struct CameraExtrinsics {
  Pose right_to_left;
  Pose left_to_imu;

  static CameraExtrinsics defaults() {
    Eigen::Matrix4d t10 = Eigen::Matrix4d::Identity();
    t10(0, 3) = 0.05;
    Eigen::Matrix4d t0i;
    t0i << 0, 0, 1, 0.12,  //
        -1, 0, 0, 0,       //
        0, -1, 0, 0,       //
        0, 0, 0, 1;
    return {Pose::from_matrix(t10), Pose::from_matrix(t0i)};
  }
};

/// Range image holding z-depth in meters; `kNoReturn` marks pixels without a hit.
struct DepthImage {
  static constexpr float kNoReturn = std::numeric_limits<float>::quiet_NaN();

  int width = 0;
  int height = 0;
  double timestamp = 0.0;
  std::vector<float> depth;

  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  static bool valid(float d) { return std::isfinite(d); }

  std::size_t finite_count() const {
    std::size_t n = 0;
    for (float d : depth) n += valid(d) ? 1 : 0;
    return n;
  }
};

struct PointCloud {
  double timestamp = 0.0;
  std::vector<Eigen::Vector3f> points;  // left-camera frame, m
};

/// Grey and color frames carry metadata only; nothing downstream reads pixels.
struct ImageStub {
  std::string encoding;  // "mono8" | "rgb8"
  int width = 0;
  int height = 0;
  double timestamp = 0.0;
};

/// Raycasts one depth image. Pixel (u, v) looks through (u + 0.5, v + 0.5);
/// the stored value is depth along the optical axis. `depth_noise_sigma`
/// adds Gaussian range noise when an Rng is supplied.
inline DepthImage render_depth(const WorldModel& world, const Pose& camera_pose, const CameraIntrinsics& intr,
                               double max_range, double timestamp = 0.0, Rng* noise_rng = nullptr,
                               double depth_noise_sigma = 0.0) {
  DepthImage img;
  img.width = intr.width;
  img.height = intr.height;
  img.timestamp = timestamp;
  img.depth.assign(static_cast<std::size_t>(intr.width) * intr.height, DepthImage::kNoReturn);
  const Mat3 rot = camera_pose.orientation.toRotationMatrix();
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 ray_cam((u + 0.5 - intr.cx) / intr.fx, (v + 0.5 - intr.cy) / intr.fy, 1.0);
      const double ray_len = ray_cam.norm();
      const Vec3 dir = rot * (ray_cam / ray_len);
      // max_range bounds the z-depth, i.e. range along the ray of max_range * |ray_cam|.
      const auto hit = ray_hit(world, camera_pose.position, dir, max_range * ray_len);
      if (!hit) continue;
      double z = *hit / ray_len;
      if (noise_rng && depth_noise_sigma > 0.0) z += noise_rng->normal(depth_noise_sigma);
      if (z > 0.0 && z <= max_range) img.depth[static_cast<std::size_t>(v) * intr.width + u] = static_cast<float>(z);
    }
  }
  return img;
}

/// Back-projects every `stride`-th finite pixel (both axes) through the pixel center.
inline PointCloud depth_to_pointcloud(const DepthImage& img, const CameraIntrinsics& intr, int stride = 1) {
  if (stride < 1) throw DomainError("depth_to_pointcloud: stride must be >= 1");
  PointCloud cloud;
  cloud.timestamp = img.timestamp;
  for (int v = 0; v < img.height; v += stride) {
    for (int u = 0; u < img.width; u += stride) {
      const float z = img.at(u, v);
      if (!DepthImage::valid(z)) continue;
      const double x = (u + 0.5 - intr.cx) * z / intr.fx;
      const double y = (v + 0.5 - intr.cy) * z / intr.fy;
      cloud.points.emplace_back(static_cast<float>(x), static_cast<float>(y), z);
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// IMU

struct ImuParams {
  double sigma_gyro = 0.0;        // rad/s, white noise
  double sigma_accel = 0.0;       // m/s^2, white noise
  double sigma_gyro_bias = 0.0;   // rad/s per sqrt(s), bias random walk
  double sigma_accel_bias = 0.0;  // m/s^2 per sqrt(s), bias random walk
};

struct ImuBiasState {
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

struct ImuSample {
  Vec3 gyro = Vec3::Zero();   // measured body rate, rad/s
  Vec3 accel = Vec3::Zero();  // measured specific force, m/s^2
  double timestamp = 0.0;
};

/// Produces one measurement: body rate and specific force (kinematic
/// acceleration minus gravity, rotated into the body), each with bias and
/// white noise. Biases then take one random-walk step of size sigma*sqrt(dt).
inline ImuSample sample_imu(const RigidBodyState& state, const Vec3& accel_inertial, const ImuParams& params,
                            ImuBiasState& bias, Rng& rng, double dt, double gravity, double timestamp = 0.0) {
  if (!(dt > 0.0)) throw DomainError("sample_imu: dt must be > 0");
  ImuSample s;
  s.timestamp = timestamp;
  const Vec3 specific_force = state.attitude.conjugate() * (accel_inertial - Vec3(0.0, 0.0, -gravity));
  s.gyro = state.body_rate + bias.gyro + rng.normal3(params.sigma_gyro);
  s.accel = specific_force + bias.accel + rng.normal3(params.sigma_accel);
  const double sq = std::sqrt(dt);
  bias.gyro += rng.normal3(params.sigma_gyro_bias) * sq;
  bias.accel += rng.normal3(params.sigma_accel_bias) * sq;
  return s;
}

}  // namespace navsim
