#pragma once

#include "navsim/dynamics.hpp"
#include "navsim/localization.hpp"
#include "navsim/mapping.hpp"
#include "navsim/planning/planner.hpp"
#include "navsim/sensors.hpp"
#include "navsim/world.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace navsim {

struct CameraConfig {
  int width = 640;
  int height = 360;
  double hfov = 1.5;
  int decimation = 4;        // rendered image is (width/decimation) x (height/decimation), same hfov
  int cloud_stride = 2;      // pixel stride when back-projecting the rendered image
  double max_range = 8.0;    // m
  double depth_noise_sigma = 0.0;
  CameraExtrinsics extrinsics = CameraExtrinsics::defaults();

  CameraIntrinsics nominal_intrinsics() const { return intrinsics_from_fov(width, height, hfov); }
  CameraIntrinsics render_intrinsics() const {
    return intrinsics_from_fov(std::max(1, width / decimation), std::max(1, height / decimation), hfov);
  }
};

struct MappingConfig {
  OccupancyParams occupancy;
  ProjectionParams projection;
  LocalMapParams local;
  double esdf_d_max = 5.0;
  std::optional<Vec3> origin;  // default: centered on the world bounds, z = 0
};

struct LogConfig {
  int pointcloud_every = 0;  // write every n-th camera cloud to the side file; 0 disables
};

/// Full simulator configuration. Read-only once a run starts.
struct SimConfig {
  double physics_dt = 1.0 / 400.0;
  double gravity = 9.81;
  double vehicle_mass = 1.5;
  Vec3 inertia = Vec3(0.029, 0.029, 0.055);
  int camera_hz = 30;
  int imu_hz = 200;
  int ground_truth_hz = 50;
  double speed_limit = 1.0;
  double voxel_size = 0.2;
  std::array<int, 3> map_dims{110, 110, 15};
  double inflation_radius = 0.4;
  std::uint64_t rng_seed = 1;
  double command_timeout = 0.5;

  CameraConfig camera;
  ImuParams imu{0.002, 0.02, 2e-5, 2e-4};
  EstimatorParams estimator{VioNoiseModel{0.02, 0.005, 0.027, 30.0}, 0.6, 0.08};
  MappingConfig mapping;
  PlannerParams planner;
  LogConfig log;
  Pose body_to_imu;
  std::string world;  // descriptor reference used by `serve`

  int tick_hz() const { return static_cast<int>(std::lround(1.0 / physics_dt)); }
  VehicleParams vehicle() const { return {vehicle_mass, inertia, gravity}; }

  void validate() const {
    if (!(physics_dt > 0.0)) throw ConfigError("physics_dt must be > 0");
    const double hz = 1.0 / physics_dt;
    if (std::abs(hz - std::round(hz)) > 1e-6) throw ConfigError("1/physics_dt must be an integer tick rate");
    if (camera_hz < 1 || imu_hz < 1 || ground_truth_hz < 1) throw ConfigError("sensor rates must be >= 1 Hz");
    if (imu_hz > tick_hz() || ground_truth_hz > tick_hz()) throw ConfigError("sensor rates cannot exceed the tick rate");
    if (camera_hz > imu_hz) throw ConfigError("camera_hz cannot exceed imu_hz (vision fixes ride the IMU grid)");
    if (tick_hz() % imu_hz != 0) throw ConfigError("imu_hz must divide the tick rate");
    if (!(speed_limit > 0.0)) throw ConfigError("speed_limit must be > 0");
    if (!(voxel_size > 0.0)) throw ConfigError("voxel_size must be > 0");
    for (int d : map_dims)
      if (d < 1) throw ConfigError("map_dims must all be >= 1");
    if (!(vehicle_mass > 0.0) || !(inertia.array() > 0.0).all()) throw ConfigError("mass and inertia must be > 0");
    if (camera.decimation < 1 || camera.cloud_stride < 1) throw ConfigError("camera decimation/stride must be >= 1");
    if (planner.global_hz <= 0 || planner.local_hz <= 0) throw ConfigError("planner rates must be > 0");
    if (planner.limits.max_speed > speed_limit) throw ConfigError("planner max_speed exceeds speed_limit");
    if (estimator.vio.fix_rate != camera_hz) throw ConfigError("vio fix_rate must equal camera_hz");
  }
};

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (!j.is_object() || !j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline void read_vec3(const nlohmann::json& j, const char* key, Vec3& out) {
  if (!j.is_object() || !j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw ConfigError(std::string("config field '") + key + "': expected [x,y,z]");
  for (int i = 0; i < 3; ++i) out[i] = v[i].get<double>();
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (j.is_object() && j.contains(key)) return j.at(key);
  return empty;
}

}  // namespace detail

inline SimConfig config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  using detail::section;
  SimConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  read_opt(j, "physics_dt", c.physics_dt);
  read_opt(j, "gravity", c.gravity);
  read_opt(j, "vehicle_mass", c.vehicle_mass);
  detail::read_vec3(j, "inertia_diag", c.inertia);
  read_opt(j, "camera_hz", c.camera_hz);
  read_opt(j, "imu_hz", c.imu_hz);
  read_opt(j, "ground_truth_hz", c.ground_truth_hz);
  read_opt(j, "speed_limit", c.speed_limit);
  read_opt(j, "voxel_size", c.voxel_size);
  read_opt(j, "map_dims", c.map_dims);
  read_opt(j, "inflation_radius", c.inflation_radius);
  read_opt(j, "rng_seed", c.rng_seed);
  read_opt(j, "command_timeout", c.command_timeout);
  read_opt(j, "world", c.world);

  const auto& cam = section(j, "camera");
  read_opt(cam, "width", c.camera.width);
  read_opt(cam, "height", c.camera.height);
  read_opt(cam, "hfov", c.camera.hfov);
  read_opt(cam, "decimation", c.camera.decimation);
  read_opt(cam, "cloud_stride", c.camera.cloud_stride);
  read_opt(cam, "max_range", c.camera.max_range);
  read_opt(cam, "depth_noise_sigma", c.camera.depth_noise_sigma);

  const auto& imu = section(j, "imu");
  read_opt(imu, "sigma_gyro", c.imu.sigma_gyro);
  read_opt(imu, "sigma_accel", c.imu.sigma_accel);
  read_opt(imu, "sigma_gyro_bias", c.imu.sigma_gyro_bias);
  read_opt(imu, "sigma_accel_bias", c.imu.sigma_accel_bias);

  const auto& est = section(j, "estimator");
  read_opt(est, "fix_position_sigma", c.estimator.vio.fix_position_sigma);
  read_opt(est, "fix_yaw_sigma", c.estimator.vio.fix_yaw_sigma);
  read_opt(est, "drift_rate_sigma", c.estimator.vio.drift_rate_sigma);
  read_opt(est, "fuse_gain", c.estimator.fuse_gain);
  read_opt(est, "velocity_gain", c.estimator.velocity_gain);
  c.estimator.vio.fix_rate = c.camera_hz;

  const auto& map = section(j, "mapping");
  read_opt(map, "l_occ", c.mapping.occupancy.l_occ);
  read_opt(map, "l_free", c.mapping.occupancy.l_free);
  read_opt(map, "l_min", c.mapping.occupancy.l_min);
  read_opt(map, "l_max", c.mapping.occupancy.l_max);
  read_opt(map, "band_z_min", c.mapping.projection.z_min);
  read_opt(map, "band_z_max", c.mapping.projection.z_max);
  read_opt(map, "p_occ", c.mapping.projection.p_occ);
  read_opt(map, "p_free", c.mapping.projection.p_free);
  read_opt(map, "local_n_azimuth", c.mapping.local.n_azimuth);
  read_opt(map, "local_n_ring", c.mapping.local.n_ring);
  read_opt(map, "local_n_z", c.mapping.local.n_z);
  read_opt(map, "local_max_radius", c.mapping.local.max_radius);
  read_opt(map, "esdf_d_max", c.mapping.esdf_d_max);
  if (map.contains("origin")) {
    Vec3 o;
    detail::read_vec3(map, "origin", o);
    c.mapping.origin = o;
  }

  const auto& pl = section(j, "planner");
  read_opt(pl, "global_hz", c.planner.global_hz);
  read_opt(pl, "local_hz", c.planner.local_hz);
  read_opt(pl, "cruise_alt", c.planner.cruise_alt);
  read_opt(pl, "cruise_speed", c.planner.limits.cruise_speed);
  read_opt(pl, "max_speed", c.planner.limits.max_speed);
  read_opt(pl, "lookahead", c.planner.lookahead);
  read_opt(pl, "reach_radius", c.planner.reach_radius);
  read_opt(pl, "unknown_as_free", c.planner.unknown_as_free);
  read_opt(pl, "has_step_deg", c.planner.has.step_deg);
  read_opt(pl, "has_max_offset_deg", c.planner.has.max_offset_deg);
  read_opt(pl, "has_step_length", c.planner.has.step_length);
  read_opt(pl, "has_tier_deg", c.planner.has.tier_deg);
  read_opt(pl, "safe_radius", c.planner.has.safe_radius);

  const auto& lg = section(j, "log");
  read_opt(lg, "pointcloud_every", c.log.pointcloud_every);

  c.planner.inflation_radius = c.inflation_radius;
  c.planner.has.corridor_radius = c.inflation_radius;
  c.validate();
  return c;
}

inline SimConfig load_config_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    return config_from_json(detail::parse_document(text));
  } catch (const ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// Round-trippable summary of the fields that affect a run (stored in log headers).
inline nlohmann::json config_to_json(const SimConfig& c) {
  nlohmann::json j;
  j["physics_dt"] = c.physics_dt;
  j["gravity"] = c.gravity;
  j["vehicle_mass"] = c.vehicle_mass;
  j["inertia_diag"] = {c.inertia.x(), c.inertia.y(), c.inertia.z()};
  j["camera_hz"] = c.camera_hz;
  j["imu_hz"] = c.imu_hz;
  j["ground_truth_hz"] = c.ground_truth_hz;
  j["speed_limit"] = c.speed_limit;
  j["voxel_size"] = c.voxel_size;
  j["map_dims"] = c.map_dims;
  j["inflation_radius"] = c.inflation_radius;
  j["rng_seed"] = c.rng_seed;
  j["command_timeout"] = c.command_timeout;
  j["camera"] = {{"width", c.camera.width},           {"height", c.camera.height},
                 {"hfov", c.camera.hfov},             {"decimation", c.camera.decimation},
                 {"cloud_stride", c.camera.cloud_stride}, {"max_range", c.camera.max_range},
                 {"depth_noise_sigma", c.camera.depth_noise_sigma}};
  j["imu"] = {{"sigma_gyro", c.imu.sigma_gyro},
              {"sigma_accel", c.imu.sigma_accel},
              {"sigma_gyro_bias", c.imu.sigma_gyro_bias},
              {"sigma_accel_bias", c.imu.sigma_accel_bias}};
  j["estimator"] = {{"fix_position_sigma", c.estimator.vio.fix_position_sigma},
                    {"fix_yaw_sigma", c.estimator.vio.fix_yaw_sigma},
                    {"drift_rate_sigma", c.estimator.vio.drift_rate_sigma},
                    {"fuse_gain", c.estimator.fuse_gain},
                    {"velocity_gain", c.estimator.velocity_gain}};
  j["mapping"] = {{"l_occ", c.mapping.occupancy.l_occ},
                  {"l_free", c.mapping.occupancy.l_free},
                  {"l_min", c.mapping.occupancy.l_min},
                  {"l_max", c.mapping.occupancy.l_max},
                  {"band_z_min", c.mapping.projection.z_min},
                  {"band_z_max", c.mapping.projection.z_max},
                  {"p_occ", c.mapping.projection.p_occ},
                  {"p_free", c.mapping.projection.p_free},
                  {"local_n_azimuth", c.mapping.local.n_azimuth},
                  {"local_n_ring", c.mapping.local.n_ring},
                  {"local_n_z", c.mapping.local.n_z},
                  {"local_max_radius", c.mapping.local.max_radius},
                  {"esdf_d_max", c.mapping.esdf_d_max}};
  if (c.mapping.origin)
    j["mapping"]["origin"] = {c.mapping.origin->x(), c.mapping.origin->y(), c.mapping.origin->z()};
  j["planner"] = {{"global_hz", c.planner.global_hz},
                  {"local_hz", c.planner.local_hz},
                  {"cruise_alt", c.planner.cruise_alt},
                  {"cruise_speed", c.planner.limits.cruise_speed},
                  {"max_speed", c.planner.limits.max_speed},
                  {"lookahead", c.planner.lookahead},
                  {"reach_radius", c.planner.reach_radius},
                  {"unknown_as_free", c.planner.unknown_as_free},
                  {"has_step_deg", c.planner.has.step_deg},
                  {"has_max_offset_deg", c.planner.has.max_offset_deg},
                  {"has_step_length", c.planner.has.step_length},
                  {"has_tier_deg", c.planner.has.tier_deg},
                  {"safe_radius", c.planner.has.safe_radius}};
  j["log"] = {{"pointcloud_every", c.log.pointcloud_every}};
  if (!c.world.empty()) j["world"] = c.world;
  return j;
}

}  // namespace navsim
