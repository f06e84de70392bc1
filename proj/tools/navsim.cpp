// navsim command-line front end: run, replay, serve.

#include "navsim/runtime/metrics.hpp"
#include "navsim/runtime/simulator.hpp"
#include "navsim/service/server.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitMissionFailure = 2;
constexpr int kExitConfigError = 3;

nlohmann::json timing_json(const navsim::StageTimings& t) {
  auto one = [](const navsim::StageTiming& s) {
    return nlohmann::json{{"count", s.count}, {"mean_ms", s.mean_ms()}, {"max_ms", 1e3 * s.max_s}, {"total_s", s.total_s}};
  };
  return {{"mapping_integration", one(t.mapping_integration)},
          {"esdf", one(t.esdf)},
          {"global_plan", one(t.global_plan)},
          {"local_plan", one(t.local_plan)},
          {"render", one(t.render)},
          {"tick", one(t.tick)}};
}

int cmd_run(const std::string& config_path, const std::string& scenario_path, const std::string& log_path,
            bool headless, std::optional<std::uint64_t> seed) {
  using namespace navsim;
  SimConfig cfg;
  ScenarioScript script;
  WorldModel world;
  try {
    cfg = load_config_file(config_path);
    script = load_scenario_file(scenario_path);
    world = load_scenario_world(script);
  } catch (const ConfigError& e) {
    std::cerr << "navsim: config error: " << e.what() << '\n';
    return kExitConfigError;
  }

  std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::cerr << "navsim: cannot open log for writing: " << log_path << '\n';
    return kExitError;
  }
  std::unique_ptr<SimulationCore> core;
  try {
    core = std::make_unique<SimulationCore>(cfg, world, script, seed);
  } catch (const ConfigError& e) {
    std::cerr << "navsim: config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  core->log().set_sink([&out](const std::string& line) { out << line; });
  if (cfg.log.pointcloud_every > 0) core->set_cloud_writer(std::make_shared<CloudWriter>(log_path + ".clouds"));

  const auto wall0 = std::chrono::steady_clock::now();
  std::uint64_t overruns = 0;
  while (!core->finished()) {
    core->step();
    if (!headless) {
      // Throttle to real time; never skip ticks when behind.
      const auto target = wall0 + std::chrono::duration<double>(core->time());
      const auto now = std::chrono::steady_clock::now();
      if (target > now)
        std::this_thread::sleep_until(target);
      else if (now - target > std::chrono::duration<double>(core->dt()))
        ++overruns;
    }
  }
  out.flush();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

  const MissionMetrics m = compute_metrics(core->log());
  nlohmann::json timing = {{"wall_s", wall},
                           {"sim_s", core->time()},
                           {"real_time_factor", wall > 0.0 ? real_time_factor(core->time(), wall) : 0.0},
                           {"headless", headless},
                           {"scheduler_overruns", overruns},
                           {"stages", timing_json(core->timings())}};
  std::ofstream(log_path + ".timing.json") << timing.dump(2) << '\n';

  nlohmann::json summary = metrics_to_json(m);
  summary["real_time_factor"] = timing["real_time_factor"];
  std::cout << summary.dump(2) << '\n';

  const Verdict v = core->verdict();
  if (v == Verdict::success) return kExitOk;
  if (v == Verdict::timeout && script.mode == MissionMode::manual) return kExitOk;
  return kExitMissionFailure;
}

int cmd_replay(const std::string& log_path, bool metrics) {
  using namespace navsim;
  try {
    const SimLog log = read_log_file(log_path);
    if (metrics) {
      std::cout << metrics_to_json(compute_metrics(log)).dump(2) << '\n';
    } else {
      std::cout << "records: " << log.record_count() << "\nverdict: " << (log.end ? log.end->verdict : "none")
                << '\n';
    }
    return kExitOk;
  } catch (const TruncatedStreamError& e) {
    std::cerr << "navsim: " << e.what() << " (last valid byte offset " << e.last_valid_offset() << ", "
              << e.partial().record_count() << " records recovered)\n";
    return kExitError;
  } catch (const LogSchemaError& e) {
    std::cerr << "navsim: " << e.what() << '\n';
    return kExitError;
  } catch (const Error& e) {
    std::cerr << "navsim: " << e.what() << '\n';
    return kExitError;
  }
}

std::atomic<bool> g_stop{false};

int cmd_serve(const std::string& config_path, const std::string& scenario_path, int port,
              std::optional<std::uint64_t> seed) {
  using namespace navsim;
  SimConfig cfg;
  ScenarioScript script;
  WorldModel world;
  try {
    cfg = load_config_file(config_path);
    if (!scenario_path.empty()) {
      script = load_scenario_file(scenario_path);
    } else {
      script.world = cfg.world;
      script.base_dir = std::filesystem::path(config_path).parent_path();
      script.mode = MissionMode::click_and_fly;
      script.timeout = 1e9;
    }
    if (script.world.empty()) throw ConfigError("no world: set \"world\" in the config or pass --scenario");
    world = load_scenario_world(script);
  } catch (const ConfigError& e) {
    std::cerr << "navsim: config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    SimService service(cfg, world, script, seed.value_or(cfg.rng_seed));
    const unsigned short bound = service.listen(static_cast<unsigned short>(port));
    std::cout << "navsim: serving on ws://0.0.0.0:" << bound << '\n' << std::flush;
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    service.start();
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
    return kExitOk;
  } catch (const ServiceError& e) {
    std::cerr << "navsim: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"navsim: UAV navigation simulator"};
  app.require_subcommand(1);

  std::string config, scenario, log_path;
  bool headless = false;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run a scenario and write a log");
  run->add_option("--config", config, "simulator config (JSON)")->required();
  run->add_option("--scenario", scenario, "scenario script (JSON)")->required();
  run->add_option("--log", log_path, "output log path")->required();
  run->add_flag("--headless", headless, "run as fast as possible instead of real time");
  run->add_option("--seed", seed, "override the config rng_seed");

  bool metrics = false;
  auto* replay = app.add_subcommand("replay", "re-read a log and evaluate it");
  replay->add_option("--log", log_path, "log path")->required();
  replay->add_flag("--metrics", metrics, "print evaluation metrics as JSON");

  int port = 8765;
  auto* serve = app.add_subcommand("serve", "run the simulation behind the WebSocket service");
  serve->add_option("--config", config, "simulator config (JSON)")->required();
  serve->add_option("--port", port, "TCP port (0 picks a free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--scenario", scenario, "optional scenario for the initial pose and world");
  serve->add_option("--seed", seed, "override the config rng_seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }
  if (*run) return cmd_run(config, scenario, log_path, headless, seed);
  if (*replay) return cmd_replay(log_path, metrics);
  if (*serve) return cmd_serve(config, scenario, port, seed);
  return kExitError;
}
