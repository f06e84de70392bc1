#pragma once

#include "navsim/common.hpp"
#include "navsim/world.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace navsim {

enum class MissionMode { manual, click_and_fly };

inline const char* to_string(MissionMode m) { return m == MissionMode::manual ? "manual" : "click_and_fly"; }

struct ScenarioEvent {
  enum class Kind { goal, teleop };
  Kind kind = Kind::goal;
  double t = 0.0;         // s, simulation time the event fires
  Vec2 goal = Vec2::Zero();
  // teleop segment: body-frame velocity (x forward, y left, z up) and yaw rate held for `duration`
  Vec3 velocity = Vec3::Zero();
  double yaw_rate = 0.0;
  double duration = 0.0;
};

struct ScenarioScript {
  std::string world;  // descriptor reference, resolved against the scenario directory
  Vec3 initial_position = Vec3(0.0, 0.0, 1.0);
  double initial_yaw = 0.0;
  MissionMode mode = MissionMode::click_and_fly;
  double timeout = 60.0;  // s
  std::vector<ScenarioEvent> events;
  std::filesystem::path base_dir;  // directory of the scenario file, for world resolution

  std::size_t goal_count() const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.kind == ScenarioEvent::Kind::goal;
    return n;
  }

  void validate() const {
    if (!(timeout > 0.0)) throw ConfigError("scenario timeout must be > 0");
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (!(events[i].t >= 0.0)) throw ConfigError("scenario event times must be >= 0");
      if (i > 0 && events[i].t < events[i - 1].t) throw ConfigError("scenario events must be time-ordered");
      if (events[i].kind == ScenarioEvent::Kind::teleop && !(events[i].duration > 0.0))
        throw ConfigError("teleop segment duration must be > 0");
    }
  }
};

/// Format:
///   {"world": "../worlds/paper_world", "initial_pose": {"position": [x,y,z], "yaw": 0},
///    "mode": "click_and_fly" | "manual", "timeout": 300,
///    "events": [{"t": 0, "type": "goal", "x": 1, "y": 2},
///               {"t": 5, "type": "teleop", "duration": 2, "velocity": [vx,vy,vz], "yaw_rate": 0}]}
inline ScenarioScript scenario_from_json(const nlohmann::json& j) {
  ScenarioScript s;
  try {
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    s.world = j.value("world", std::string());
    if (j.contains("initial_pose")) {
      const auto& ip = j.at("initial_pose");
      if (ip.contains("position")) {
        const auto& p = ip.at("position");
        if (!p.is_array() || p.size() != 3) throw ConfigError("initial_pose.position: expected [x,y,z]");
        s.initial_position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      }
      s.initial_yaw = ip.value("yaw", 0.0);
    }
    const std::string mode = j.value("mode", std::string("click_and_fly"));
    if (mode == "manual")
      s.mode = MissionMode::manual;
    else if (mode == "click_and_fly")
      s.mode = MissionMode::click_and_fly;
    else
      throw ConfigError("scenario mode must be 'manual' or 'click_and_fly', got '" + mode + "'");
    s.timeout = j.value("timeout", s.timeout);
    if (j.contains("events")) {
      for (const auto& je : j.at("events")) {
        ScenarioEvent e;
        e.t = je.at("t").get<double>();
        const std::string type = je.at("type").get<std::string>();
        if (type == "goal") {
          e.kind = ScenarioEvent::Kind::goal;
          e.goal = Vec2(je.at("x").get<double>(), je.at("y").get<double>());
        } else if (type == "teleop") {
          e.kind = ScenarioEvent::Kind::teleop;
          e.duration = je.at("duration").get<double>();
          const auto& v = je.at("velocity");
          if (!v.is_array() || v.size() != 3) throw ConfigError("teleop velocity: expected [vx,vy,vz]");
          e.velocity = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
          e.yaw_rate = je.value("yaw_rate", 0.0);
        } else {
          throw ConfigError("unknown scenario event type '" + type + "'");
        }
        s.events.push_back(e);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::json scenario_to_json(const ScenarioScript& s) {
  nlohmann::json j;
  j["world"] = s.world;
  j["initial_pose"] = {{"position", {s.initial_position.x(), s.initial_position.y(), s.initial_position.z()}},
                       {"yaw", s.initial_yaw}};
  j["mode"] = to_string(s.mode);
  j["timeout"] = s.timeout;
  j["events"] = nlohmann::json::array();
  for (const auto& e : s.events) {
    if (e.kind == ScenarioEvent::Kind::goal) {
      j["events"].push_back({{"t", e.t}, {"type", "goal"}, {"x", e.goal.x()}, {"y", e.goal.y()}});
    } else {
      j["events"].push_back({{"t", e.t},
                             {"type", "teleop"},
                             {"duration", e.duration},
                             {"velocity", {e.velocity.x(), e.velocity.y(), e.velocity.z()}},
                             {"yaw_rate", e.yaw_rate}});
    }
  }
  return j;
}

inline ScenarioScript load_scenario_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  ScenarioScript s;
  try {
    s = scenario_from_json(detail::parse_document(text));
  } catch (const ParseError& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.base_dir = path.parent_path();
  return s;
}

/// Loads the scenario's world: the reference is tried relative to the
/// scenario directory, then as given.
inline WorldModel load_scenario_world(const ScenarioScript& s) {
  if (s.world.empty()) return WorldModel(WorldBounds{}, {});
  const std::filesystem::path ref(s.world);
  try {
    if (ref.is_relative() && !s.base_dir.empty()) {
      try {
        return load_world_file(s.base_dir / ref);
      } catch (const ParseError&) {
        throw;
      } catch (const GeometryError&) {
        throw;
      } catch (const Error&) {
        // fall through to the reference as given
      }
    }
    return load_world_file(ref);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("world: ") + e.what());
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("world: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace navsim
