#pragma once

#include "navsim/common.hpp"
#include "navsim/sensors.hpp"

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace navsim {

inline constexpr int kLogSchemaVersion = 1;
inline constexpr const char* kLogSchemaName = "navsim.log";

/// Tick phases, in execution order within one tick.
enum class Phase : int { command = 0, physics = 1, sensors = 2, estimator = 3, mapping = 4, planning = 5, control = 6 };

struct RecordMeta {
  std::uint64_t seq = 0;
  Phase phase = Phase::physics;
  double t = 0.0;
};

struct GroundTruthRecord : RecordMeta {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  Vec3 body_rate = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();  // inertial, from the applied wrench
};

struct EstimateRecord : RecordMeta {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  bool vision_corrected = false;
};

struct VisionRecord : RecordMeta {
  Vec3 position = Vec3::Zero();
  Quat attitude = Quat::Identity();
};

struct CommandRecord : RecordMeta {
  std::string source;  // planner | teleop | hold
  bool velocity = true;
  Vec3 value = Vec3::Zero();
  double yaw = 0.0;
};

struct EventRecord : RecordMeta {
  std::string kind;
  nlohmann::json data = nlohmann::json::object();
};

struct PathRecord : RecordMeta {
  std::vector<Vec2> waypoints;
  Vec3 local_goal = Vec3::Zero();
};

/// Projected occupancy snapshot: one character per cell, row-major from the
/// grid origin ('.' free, '#' occupied, '?' unknown).
struct MapRecord : RecordMeta {
  std::string label;
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  Vec2 origin = Vec2::Zero();
  std::string cells;
};

struct CloudRecord : RecordMeta {
  std::uint64_t offset = 0;  // byte offset in the side file
  std::uint32_t count = 0;
};

struct EndRecord : RecordMeta {
  std::string verdict;
  std::string reason;
};

class LogSchemaError : public Error {
 public:
  using Error::Error;
};

class SimLog;

/// Raised when a line fails its checksum or does not parse. Everything before
/// the damaged line is available through partial().
class TruncatedStreamError : public Error {
 public:
  TruncatedStreamError(const std::string& what, std::uint64_t last_valid_offset, std::size_t line,
                       std::shared_ptr<SimLog> partial)
      : Error(what), offset_(last_valid_offset), line_(line), partial_(std::move(partial)) {}
  std::uint64_t last_valid_offset() const { return offset_; }
  std::size_t line() const { return line_; }
  const SimLog& partial() const { return *partial_; }

 private:
  std::uint64_t offset_;
  std::size_t line_;
  std::shared_ptr<SimLog> partial_;
};

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline nlohmann::json vec_json(const Vec2& v) { return {v.x(), v.y()}; }
inline nlohmann::json quat_json(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }
inline Vec3 json_vec3(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
inline Vec2 json_vec2(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
inline Quat json_quat(const nlohmann::json& j) {
  return Quat(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>());
}

inline std::uint32_t crc32(const std::string& s) {
  boost::crc_32_type c;
  c.process_bytes(s.data(), s.size());
  return c.checksum();
}

inline std::string frame_line(const std::string& body) {
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", crc32(body));
  return std::string(hex) + " " + body + "\n";
}

inline nlohmann::json meta_json(const char* kind, const RecordMeta& m) {
  nlohmann::json j;
  j["k"] = kind;
  j["seq"] = m.seq;
  j["ph"] = static_cast<int>(m.phase);
  j["t"] = m.t;
  return j;
}

inline void read_meta(const nlohmann::json& j, RecordMeta& m) {
  m.seq = j.at("seq").get<std::uint64_t>();
  m.phase = static_cast<Phase>(j.at("ph").get<int>());
  m.t = j.at("t").get<double>();
}

}  // namespace detail

/// Append-only simulation log. Records keep their global sequence number and
/// tick phase; timestamps are non-decreasing in sequence order. An optional
/// sink receives each serialized line as it is appended.
class SimLog {
 public:
  using Sink = std::function<void(const std::string& line)>;

  nlohmann::json header = nlohmann::json::object();  // config, scenario, world, seed

  std::vector<GroundTruthRecord> ground_truth;
  std::vector<EstimateRecord> estimates;
  std::vector<VisionRecord> vision;
  std::vector<CommandRecord> commands;
  std::vector<EventRecord> events;
  std::vector<PathRecord> paths;
  std::vector<MapRecord> maps;
  std::vector<CloudRecord> clouds;
  std::optional<EndRecord> end;

  void set_sink(Sink s) { sink_ = std::move(s); }
  /// Called for every event record (and the end record, as kind "mission_end").
  void set_event_hook(std::function<void(const EventRecord&)> h) { event_hook_ = std::move(h); }
  /// With retention off, records only go to the sink (long-running service sessions).
  void set_retain(bool r) { retain_ = r; }

  /// Emits the header line; must precede all records when streaming.
  void write_header() {
    nlohmann::json j = header;
    j["k"] = "header";
    j["schema"] = kLogSchemaName;
    j["version"] = kLogSchemaVersion;
    emit(j);
  }

  std::size_t record_count() const {
    return ground_truth.size() + estimates.size() + vision.size() + commands.size() + events.size() + paths.size() +
           maps.size() + clouds.size() + (end ? 1 : 0);
  }
  double last_time() const { return last_t_; }
  std::uint64_t next_seq() const { return next_seq_; }

  void add(GroundTruthRecord r) {
    stamp(r);
    auto j = detail::meta_json("gt", r);
    j["p"] = detail::vec_json(r.position);
    j["v"] = detail::vec_json(r.velocity);
    j["q"] = detail::quat_json(r.attitude);
    j["w"] = detail::vec_json(r.body_rate);
    j["a"] = detail::vec_json(r.acceleration);
    if (retain_) ground_truth.push_back(r);
    emit(j);
  }
  void add(EstimateRecord r) {
    stamp(r);
    auto j = detail::meta_json("est", r);
    j["p"] = detail::vec_json(r.position);
    j["v"] = detail::vec_json(r.velocity);
    j["q"] = detail::quat_json(r.attitude);
    j["vis"] = r.vision_corrected;
    if (retain_) estimates.push_back(r);
    emit(j);
  }
  void add(VisionRecord r) {
    stamp(r);
    auto j = detail::meta_json("vis", r);
    j["p"] = detail::vec_json(r.position);
    j["q"] = detail::quat_json(r.attitude);
    if (retain_) vision.push_back(r);
    emit(j);
  }
  void add(CommandRecord r) {
    stamp(r);
    auto j = detail::meta_json("cmd", r);
    j["src"] = r.source;
    j["vel"] = r.velocity;
    j["val"] = detail::vec_json(r.value);
    j["yaw"] = r.yaw;
    if (retain_) commands.push_back(r);
    emit(j);
  }
  void add(EventRecord r) {
    stamp(r);
    auto j = detail::meta_json("ev", r);
    j["kind"] = r.kind;
    j["data"] = r.data;
    if (retain_) events.push_back(r);
    emit(j);
    if (event_hook_) event_hook_(r);
  }
  void add(PathRecord r) {
    stamp(r);
    auto j = detail::meta_json("path", r);
    j["wp"] = nlohmann::json::array();
    for (const auto& w : r.waypoints) j["wp"].push_back(detail::vec_json(w));
    j["lg"] = detail::vec_json(r.local_goal);
    if (retain_) paths.push_back(r);
    emit(j);
  }
  void add(MapRecord r) {
    stamp(r);
    auto j = detail::meta_json("map", r);
    j["label"] = r.label;
    j["w"] = r.width;
    j["h"] = r.height;
    j["res"] = r.resolution;
    j["origin"] = detail::vec_json(r.origin);
    j["cells"] = r.cells;
    if (retain_) maps.push_back(r);
    emit(j);
  }
  void add(CloudRecord r) {
    stamp(r);
    auto j = detail::meta_json("cloud", r);
    j["off"] = r.offset;
    j["n"] = r.count;
    if (retain_) clouds.push_back(r);
    emit(j);
  }
  void add(EndRecord r) {
    if (end) throw Error("log already closed");
    stamp(r);
    auto j = detail::meta_json("end", r);
    j["verdict"] = r.verdict;
    j["reason"] = r.reason;
    end = r;
    emit(j);
    if (event_hook_) {
      EventRecord e;
      static_cast<RecordMeta&>(e) = r;
      e.kind = "mission_end";
      e.data = {{"verdict", r.verdict}, {"reason", r.reason}};
      event_hook_(e);
    }
  }

  /// Re-inserts a parsed record, keeping its sequence number.
  void restore(const nlohmann::json& j);

 private:
  template <typename R>
  void stamp(R& r) {
    if (r.t < last_t_) throw Error("log timestamps must be non-decreasing");
    last_t_ = r.t;
    r.seq = next_seq_++;
  }
  void emit(const nlohmann::json& j) {
    if (sink_) sink_(detail::frame_line(j.dump()));
  }

  Sink sink_;
  std::function<void(const EventRecord&)> event_hook_;
  bool retain_ = true;
  double last_t_ = 0.0;
  std::uint64_t next_seq_ = 0;
};

inline void SimLog::restore(const nlohmann::json& j) {
  const std::string k = j.at("k").get<std::string>();
  auto finish = [&](RecordMeta& m) {
    detail::read_meta(j, m);
    if (m.t < last_t_) throw Error("timestamps decrease");
    last_t_ = m.t;
    next_seq_ = m.seq + 1;
  };
  if (k == "gt") {
    GroundTruthRecord r;
    finish(r);
    r.position = detail::json_vec3(j.at("p"));
    r.velocity = detail::json_vec3(j.at("v"));
    r.attitude = detail::json_quat(j.at("q"));
    r.body_rate = detail::json_vec3(j.at("w"));
    r.acceleration = detail::json_vec3(j.at("a"));
    ground_truth.push_back(r);
  } else if (k == "est") {
    EstimateRecord r;
    finish(r);
    r.position = detail::json_vec3(j.at("p"));
    r.velocity = detail::json_vec3(j.at("v"));
    r.attitude = detail::json_quat(j.at("q"));
    r.vision_corrected = j.at("vis").get<bool>();
    estimates.push_back(r);
  } else if (k == "vis") {
    VisionRecord r;
    finish(r);
    r.position = detail::json_vec3(j.at("p"));
    r.attitude = detail::json_quat(j.at("q"));
    vision.push_back(r);
  } else if (k == "cmd") {
    CommandRecord r;
    finish(r);
    r.source = j.at("src").get<std::string>();
    r.velocity = j.at("vel").get<bool>();
    r.value = detail::json_vec3(j.at("val"));
    r.yaw = j.at("yaw").get<double>();
    commands.push_back(r);
  } else if (k == "ev") {
    EventRecord r;
    finish(r);
    r.kind = j.at("kind").get<std::string>();
    r.data = j.at("data");
    events.push_back(r);
  } else if (k == "path") {
    PathRecord r;
    finish(r);
    for (const auto& w : j.at("wp")) r.waypoints.push_back(detail::json_vec2(w));
    r.local_goal = detail::json_vec3(j.at("lg"));
    paths.push_back(r);
  } else if (k == "map") {
    MapRecord r;
    finish(r);
    r.label = j.at("label").get<std::string>();
    r.width = j.at("w").get<int>();
    r.height = j.at("h").get<int>();
    r.resolution = j.at("res").get<double>();
    r.origin = detail::json_vec2(j.at("origin"));
    r.cells = j.at("cells").get<std::string>();
    maps.push_back(r);
  } else if (k == "cloud") {
    CloudRecord r;
    finish(r);
    r.offset = j.at("off").get<std::uint64_t>();
    r.count = j.at("n").get<std::uint32_t>();
    clouds.push_back(r);
  } else if (k == "end") {
    EndRecord r;
    finish(r);
    r.verdict = j.at("verdict").get<std::string>();
    r.reason = j.at("reason").get<std::string>();
    end = r;
  } else {
    throw Error("unknown record kind '" + k + "'");
  }
}

/// Parses a framed log stream. Throws LogSchemaError for a missing or
/// mismatched header and TruncatedStreamError at the first damaged line.
inline SimLog read_log(std::istream& in) {
  auto log = std::make_shared<SimLog>();
  std::string line;
  std::uint64_t offset = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (true) {
    const auto line_start = offset;
    if (!std::getline(in, line)) break;
    ++line_no;
    const bool terminated = !in.eof();
    offset += line.size() + (terminated ? 1 : 0);
    auto fail = [&](const std::string& why) {
      throw TruncatedStreamError("log line " + std::to_string(line_no) + ": " + why, line_start, line_no, log);
    };
    if (!terminated) fail("unterminated final line");
    if (line.size() < 10 || line[8] != ' ') fail("malformed frame");
    const std::string body = line.substr(9);
    std::uint32_t crc = 0;
    try {
      std::size_t used = 0;
      crc = static_cast<std::uint32_t>(std::stoul(line.substr(0, 8), &used, 16));
      if (used != 8) fail("malformed checksum");
    } catch (const std::logic_error&) {
      fail("malformed checksum");
    }
    if (crc != detail::crc32(body)) fail("checksum mismatch");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      fail("record does not parse");
    }
    if (!have_header) {
      if (j.value("k", std::string()) != "header" || j.value("schema", std::string()) != kLogSchemaName)
        throw LogSchemaError("not a navsim log (missing header)");
      const int v = j.value("version", -1);
      if (v != kLogSchemaVersion)
        throw LogSchemaError("log schema version " + std::to_string(v) + " is not supported (expected " +
                             std::to_string(kLogSchemaVersion) + ")");
      j.erase("k");
      j.erase("schema");
      j.erase("version");
      log->header = j;
      have_header = true;
      continue;
    }
    try {
      log->restore(j);
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  if (!have_header) throw LogSchemaError("empty stream (missing header)");
  return std::move(*log);
}

inline SimLog read_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open log: " + path);
  return read_log(in);
}

// ---------------------------------------------------------------------------
// Point-cloud side file: "NVPC" magic, u32 version, then per cloud
// f64 timestamp, u32 count, count x (f32 x, f32 y, f32 z). Little-endian.

inline constexpr std::array<char, 4> kCloudMagic{'N', 'V', 'P', 'C'};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error("point-cloud side file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

class CloudWriter {
 public:
  explicit CloudWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot open point-cloud side file: " + path);
    out_.write(kCloudMagic.data(), 4);
    detail::put_le<std::uint32_t>(out_, 1);
    offset_ = 8;
  }

  /// Appends a cloud; returns its byte offset.
  std::uint64_t write(double t, const PointCloud& cloud) {
    const std::uint64_t at = offset_;
    detail::put_le<double>(out_, t);
    detail::put_le<std::uint32_t>(out_, static_cast<std::uint32_t>(cloud.points.size()));
    for (const auto& p : cloud.points)
      for (int i = 0; i < 3; ++i) detail::put_le<float>(out_, p[i]);
    offset_ += 12 + 12 * cloud.points.size();
    return at;
  }

 private:
  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

inline PointCloud read_cloud(std::istream& in, std::uint64_t offset, double* t = nullptr) {
  in.seekg(0);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCloudMagic.data(), 4) != 0) throw Error("bad point-cloud magic");
  if (detail::get_le<std::uint32_t>(in) != 1) throw Error("unsupported point-cloud side file version");
  in.seekg(static_cast<std::streamoff>(offset));
  const double ts = detail::get_le<double>(in);
  if (t) *t = ts;
  const auto n = detail::get_le<std::uint32_t>(in);
  PointCloud pc;
  pc.points.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Eigen::Vector3f p;
    for (int k = 0; k < 3; ++k) p[k] = detail::get_le<float>(in);
    pc.points.push_back(p);
  }
  return pc;
}

}  // namespace navsim
