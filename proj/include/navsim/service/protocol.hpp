#pragma once

#include "navsim/mapping.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace navsim::protocol {

inline constexpr int kVersion = 1;
inline constexpr std::array<char, 4> kVoxelMagic{'N', 'V', 'S', '1'};

/// Machine-readable nack reasons. Closed set; frozen per protocol version.
enum class NackReason {
  no_authority,      // mutating command from an observer session
  authority_denied,  // operator role requested while another session holds it
  invalid_goal,      // goal blocked by an (inflated) obstacle
  out_of_bounds,     // goal outside the world bounds
  sim_paused,        // command other than resume/reset/pause while paused
  wrong_mode,        // teleop outside manual mode, set_goal outside auto mode
  invalid_payload,   // well-formed envelope, bad or missing payload fields
  unsupported,       // unknown message type or command kind
};

inline const char* to_string(NackReason r) {
  switch (r) {
    case NackReason::no_authority: return "no_authority";
    case NackReason::authority_denied: return "authority_denied";
    case NackReason::invalid_goal: return "invalid_goal";
    case NackReason::out_of_bounds: return "out_of_bounds";
    case NackReason::sim_paused: return "sim_paused";
    case NackReason::wrong_mode: return "wrong_mode";
    case NackReason::invalid_payload: return "invalid_payload";
    case NackReason::unsupported: return "unsupported";
  }
  return "unsupported";
}

inline const std::vector<std::string>& all_nack_reasons() {
  static const std::vector<std::string> v{"no_authority", "authority_denied", "invalid_goal", "out_of_bounds",
                                          "sim_paused",   "wrong_mode",       "invalid_payload", "unsupported"};
  return v;
}

inline nlohmann::json envelope(std::uint64_t seq, const std::string& type, double t_sim, nlohmann::json payload) {
  return {{"v", kVersion}, {"seq", seq}, {"type", type}, {"t_sim", t_sim}, {"payload", std::move(payload)}};
}

struct Envelope {
  std::uint64_t seq = 0;
  std::string type;
  double t_sim = 0.0;
  nlohmann::json payload = nlohmann::json::object();
};

/// Validates and unpacks a client text frame; nullopt when malformed
/// (the server closes the connection with 1007).
inline std::optional<Envelope> parse_envelope(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (!j.is_object() || !j.contains("v") || !j.contains("type") || !j["type"].is_string()) return std::nullopt;
  if (!j["v"].is_number_integer() || j["v"].get<int>() != kVersion) return std::nullopt;
  Envelope e;
  e.type = j["type"].get<std::string>();
  if (j.contains("seq")) {
    if (!j["seq"].is_number_unsigned() && !j["seq"].is_number_integer()) return std::nullopt;
    e.seq = j["seq"].get<std::uint64_t>();
  }
  if (j.contains("t_sim") && j["t_sim"].is_number()) e.t_sim = j["t_sim"].get<double>();
  if (j.contains("payload")) {
    if (!j["payload"].is_object()) return std::nullopt;
    e.payload = j["payload"];
  }
  return e;
}

// ---------------------------------------------------------------------------
// Map layers

/// Occupancy cells as characters, row-major from the grid origin.
inline char cell_char(CellState c) { return c == CellState::free ? '.' : (c == CellState::occupied ? '#' : '?'); }
inline CellState char_cell(char c) {
  return c == '.' ? CellState::free : (c == '#' ? CellState::occupied : CellState::unknown);
}

/// One map layer as transmitted: cell values flattened row-major.
/// Occupancy uses characters, the ESDF uses float32 values.
struct LayerImage {
  std::string layer;  // "occupancy" | "esdf"
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  Vec2 origin = Vec2::Zero();
  std::string occupancy;      // width * height chars
  std::vector<float> esdf;    // width * height values

  bool operator==(const LayerImage&) const = default;
};

inline LayerImage occupancy_image(const ProjectedGrid2D& g) {
  LayerImage im{"occupancy", g.width, g.height, g.resolution, g.origin, {}, {}};
  im.occupancy.resize(g.cells.size());
  for (std::size_t i = 0; i < g.cells.size(); ++i) im.occupancy[i] = cell_char(g.cells[i]);
  return im;
}

inline LayerImage esdf_image(const EsdfMap2D& e) {
  LayerImage im{"esdf", e.width, e.height, e.resolution, e.origin, {}, {}};
  im.esdf.resize(e.distance.size());
  for (std::size_t i = 0; i < e.distance.size(); ++i) im.esdf[i] = static_cast<float>(e.distance[i]);
  return im;
}

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool empty() const { return w <= 0 || h <= 0; }
  bool operator==(const Rect&) const = default;
};

/// Bounding rectangle of the cells that differ between two same-shaped images.
inline Rect dirty_rect(const LayerImage& prev, const LayerImage& next) {
  int x0 = next.width, y0 = next.height, x1 = -1, y1 = -1;
  for (int y = 0; y < next.height; ++y)
    for (int x = 0; x < next.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * next.width + x;
      const bool diff = next.layer == "esdf" ? std::memcmp(&prev.esdf[i], &next.esdf[i], sizeof(float)) != 0
                                             : prev.occupancy[i] != next.occupancy[i];
      if (!diff) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

inline nlohmann::json layer_data(const LayerImage& im, const Rect& r) {
  if (im.layer == "esdf") {
    nlohmann::json a = nlohmann::json::array();
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) a.push_back(im.esdf[static_cast<std::size_t>(y) * im.width + x]);
    return a;
  }
  std::string s;
  s.reserve(static_cast<std::size_t>(r.w) * r.h);
  for (int y = r.y; y < r.y + r.h; ++y)
    s.append(im.occupancy, static_cast<std::size_t>(y) * im.width + r.x, static_cast<std::size_t>(r.w));
  return s;
}

inline nlohmann::json keyframe_payload(const LayerImage& im, std::uint64_t version) {
  return {{"layer", im.layer},
          {"version", version},
          {"width", im.width},
          {"height", im.height},
          {"resolution", im.resolution},
          {"origin", {im.origin.x(), im.origin.y()}},
          {"data", layer_data(im, Rect{0, 0, im.width, im.height})}};
}

inline nlohmann::json delta_payload(const LayerImage& im, const Rect& r, std::uint64_t version,
                                    std::uint64_t base_version) {
  return {{"layer", im.layer},
          {"version", version},
          {"base_version", base_version},
          {"rect", {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}},
          {"data", layer_data(im, r)}};
}

/// Client-side reassembly: a keyframe replaces the image, a delta patches its rectangle.
inline void apply_keyframe(LayerImage& im, const nlohmann::json& p) {
  im.layer = p.at("layer").get<std::string>();
  im.width = p.at("width").get<int>();
  im.height = p.at("height").get<int>();
  im.resolution = p.at("resolution").get<double>();
  im.origin = Vec2(p.at("origin")[0].get<double>(), p.at("origin")[1].get<double>());
  const std::size_t n = static_cast<std::size_t>(im.width) * im.height;
  if (im.layer == "esdf") {
    im.esdf.resize(n);
    im.occupancy.clear();
    const auto& d = p.at("data");
    if (d.size() != n) throw std::runtime_error("keyframe size mismatch");
    for (std::size_t i = 0; i < n; ++i) im.esdf[i] = d[i].get<float>();
  } else {
    im.esdf.clear();
    im.occupancy = p.at("data").get<std::string>();
    if (im.occupancy.size() != n) throw std::runtime_error("keyframe size mismatch");
  }
}

inline void apply_delta(LayerImage& im, const nlohmann::json& p) {
  const auto& r = p.at("rect");
  const int rx = r.at("x").get<int>(), ry = r.at("y").get<int>(), rw = r.at("w").get<int>(), rh = r.at("h").get<int>();
  if (rx < 0 || ry < 0 || rx + rw > im.width || ry + rh > im.height) throw std::runtime_error("delta out of range");
  const auto& d = p.at("data");
  std::size_t k = 0;
  for (int y = ry; y < ry + rh; ++y)
    for (int x = rx; x < rx + rw; ++x, ++k) {
      const std::size_t i = static_cast<std::size_t>(y) * im.width + x;
      if (im.layer == "esdf")
        im.esdf[i] = d.at(k).get<float>();
      else
        im.occupancy[i] = d.get_ref<const std::string&>().at(k);
    }
}

// ---------------------------------------------------------------------------
// Voxel frames: "NVS1", u32 count, f32 voxel_size, then count x (f32 x, y, z)
// occupied voxel centers. Little-endian.

inline std::string encode_voxels(const std::vector<Eigen::Vector3f>& centers, float voxel_size) {
  std::string out(kVoxelMagic.data(), 4);
  auto put = [&out](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    if constexpr (std::endian::native == std::endian::little) {
      out.append(reinterpret_cast<const char*>(b), n);
    } else {
      for (std::size_t i = n; i-- > 0;) out.push_back(static_cast<char>(b[i]));
    }
  };
  const auto count = static_cast<std::uint32_t>(centers.size());
  put(&count, 4);
  put(&voxel_size, 4);
  for (const auto& c : centers)
    for (int i = 0; i < 3; ++i) put(&c[i], 4);
  return out;
}

inline std::vector<Eigen::Vector3f> decode_voxels(const std::string& frame, float* voxel_size = nullptr) {
  if (frame.size() < 12 || std::memcmp(frame.data(), kVoxelMagic.data(), 4) != 0)
    throw std::runtime_error("not an NVS1 frame");
  auto get = [&frame](std::size_t off, void* dst) {
    unsigned char b[4];
    std::memcpy(b, frame.data() + off, 4);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
    std::memcpy(dst, b, 4);
  };
  std::uint32_t n = 0;
  get(4, &n);
  float vs = 0.0f;
  get(8, &vs);
  if (voxel_size) *voxel_size = vs;
  if (frame.size() != 12 + 12 * static_cast<std::size_t>(n)) throw std::runtime_error("NVS1 length mismatch");
  std::vector<Eigen::Vector3f> out(n);
  for (std::uint32_t k = 0; k < n; ++k)
    for (int i = 0; i < 3; ++i) get(12 + 12 * k + 4 * i, &out[k][i]);
  return out;
}

/// Centers of voxels whose occupancy probability exceeds p_occ.
inline std::vector<Eigen::Vector3f> occupied_voxels(const GlobalOccupancyMap& m, double p_occ) {
  const double l = std::log(p_occ / (1.0 - p_occ));
  std::vector<Eigen::Vector3f> out;
  const auto& d = m.dims();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Index3 v{i, j, k};
        if (m.observed(v) && m.log_odds(v) > l) out.push_back(m.center_of(v).cast<float>());
      }
  return out;
}

}  // namespace navsim::protocol
