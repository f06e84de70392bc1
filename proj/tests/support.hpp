// Shared fixtures for tests that drive the whole pipeline.
#pragma once

#include "navsim/runtime/metrics.hpp"
#include "navsim/runtime/simulator.hpp"

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace navsim::fixture {

inline std::string source_path(const std::string& rel) { return std::string(NAVSIM_SOURCE_DIR) + "/" + rel; }

inline SimConfig default_config() { return load_config_file(source_path("configs/default.json")); }

inline ScenarioScript scenario(const std::string& name) { return load_scenario_file(source_path("scenarios/" + name)); }

/// Runs a core to completion with the log captured in memory.
struct CapturedRun {
  std::string text;
  Verdict verdict = Verdict::running;
  MissionMetrics live;
  StageTimings timings;
  double sim_time = 0.0;
};

inline CapturedRun run_captured(const SimConfig& cfg, const WorldModel& world, const ScenarioScript& script,
                                std::optional<std::uint64_t> seed = {}) {
  CapturedRun r;
  std::ostringstream out;
  SimulationCore core(cfg, world, script, seed);
  core.log().set_sink([&out](const std::string& line) { out << line; });
  r.verdict = core.run();
  r.text = out.str();
  r.live = compute_metrics(core.log());
  r.timings = core.timings();
  r.sim_time = core.time();
  return r;
}

inline SimLog parse_log(const std::string& text) {
  std::istringstream in(text);
  return read_log(in);
}

/// (seq, phase, t) of every record, in sequence order.
inline std::vector<std::tuple<std::uint64_t, Phase, double>> record_order(const SimLog& log) {
  std::vector<std::tuple<std::uint64_t, Phase, double>> v;
  auto take = [&v](const auto& records) {
    for (const auto& r : records) v.emplace_back(r.seq, r.phase, r.t);
  };
  take(log.ground_truth);
  take(log.estimates);
  take(log.vision);
  take(log.commands);
  take(log.events);
  take(log.paths);
  take(log.maps);
  take(log.clouds);
  if (log.end) v.emplace_back(log.end->seq, log.end->phase, log.end->t);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace navsim::fixture
