#include "navsim/runtime/bus.hpp"
#include "navsim/runtime/log.hpp"
#include "navsim/runtime/simulator.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace navsim;
using navsim::fixture::source_path;

namespace {

std::string sample_log() {
  SimLog log;
  std::ostringstream out;
  log.set_sink([&out](const std::string& l) { out << l; });
  log.header = {{"seed", 3}};
  log.write_header();
  for (int i = 1; i <= 5; ++i) {
    GroundTruthRecord g;
    g.t = 0.0025 * i;
    g.position = Vec3(0.1 * i, 0.0, 1.0);
    log.add(g);
  }
  EventRecord e;
  e.t = 0.0125;
  e.phase = Phase::planning;
  e.kind = "goal_reached";
  e.data = {{"x", 1.5}};
  log.add(e);
  EndRecord end;
  end.t = 0.0125;
  end.phase = Phase::control;
  end.verdict = "success";
  log.add(end);
  return out.str();
}

std::vector<std::size_t> line_starts(const std::string& s) {
  std::vector<std::size_t> v{0};
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] == '\n' && i + 1 < s.size()) v.push_back(i + 1);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Bus

TEST(Bus, DeclareSubscribePublish) {
  TopicBus bus;
  bus.declare<int>("a", 10.0);
  EXPECT_THROW(bus.declare<int>("a", 10.0), BusError);
  std::vector<std::pair<int, std::uint64_t>> seen;
  bus.subscribe<int>("a", [&](const Message<int>& m) { seen.emplace_back(m.data, m.seq); });
  bus.set_time(1.5);
  bus.publish("a", 7);
  bus.publish("a", 8);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[1], (std::pair<int, std::uint64_t>{8, 2}));
  EXPECT_EQ(bus.count("a"), 2u);
  EXPECT_THROW(bus.publish("b", 1), BusError);
  EXPECT_THROW(bus.publish("a", 1.0), BusError);
  EXPECT_THROW(bus.subscribe<double>("a", [](const Message<double>&) {}), BusError);
  EXPECT_THROW(bus.count("b"), BusError);
}

TEST(RateDue, IntegerGridCounts) {
  for (double rate : {30.0, 50.0, 200.0, 2.0, 7.0}) {
    int n = 0;
    for (std::uint64_t k = 1; k <= 4000; ++k) n += rate_due(k, rate, 400.0);
    EXPECT_EQ(n, static_cast<int>(rate * 10)) << rate;
  }
  EXPECT_FALSE(rate_due(0, 50.0, 400.0));
  EXPECT_FALSE(rate_due(5, 0.0, 400.0));
}

// ---------------------------------------------------------------------------
// Config and scenario parsing

TEST(Config, DefaultFileLoads) {
  const auto c = load_config_file(source_path("configs/default.json"));
  EXPECT_EQ(c.tick_hz(), 400);
  EXPECT_EQ(c.camera_hz, 30);
  EXPECT_DOUBLE_EQ(c.speed_limit, 1.0);
  EXPECT_DOUBLE_EQ(c.inflation_radius, 0.4);
}

TEST(Config, InvalidValuesAreConfigErrors) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"physics_dt", 0.003}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"imu_hz", 300}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"speed_limit", -1}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"map_dims", {1, 0, 1}}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/config.json"), ConfigError);
}

TEST(Config, RoundTripsThroughJson) {
  const auto c = load_config_file(source_path("configs/default.json"));
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
}

TEST(Scenario, BundledScenariosLoad) {
  for (const char* name : {"click_and_fly.json", "survey.json", "empty.json", "hover.json"}) {
    const auto s = load_scenario_file(source_path(std::string("scenarios/") + name));
    EXPECT_NO_THROW(load_scenario_world(s)) << name;
  }
  EXPECT_EQ(load_scenario_file(source_path("scenarios/click_and_fly.json")).goal_count(), 6u);
}

TEST(Scenario, InvalidScriptsAreConfigErrors) {
  using nlohmann::json;
  EXPECT_THROW(scenario_from_json(json{{"mode", "fly"}}), ConfigError);
  EXPECT_THROW(scenario_from_json(json{{"timeout", 0}}), ConfigError);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"events":[{"t":2,"type":"goal","x":0,"y":0},
                                                           {"t":1,"type":"goal","x":0,"y":0}]})")),
               ConfigError);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"events":[{"t":1,"type":"jump"}]})")), ConfigError);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"events":[{"t":1,"type":"goal","x":0}]})")), ConfigError);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"events":[{"t":1,"type":"teleop","duration":0,
                                                             "velocity":[1,0,0]}]})")),
               ConfigError);
  ScenarioScript s;
  s.world = "no_such_world";
  EXPECT_THROW(load_scenario_world(s), ConfigError);
}

TEST(Scenario, StartInsideObstacleIsAConfigError) {
  auto script = scenario_from_json(nlohmann::json::object());
  const WorldModel w(WorldBounds{}, {Box{Vec3(-1, -1, 0), Vec3(1, 1, 2)}});
  EXPECT_THROW(SimulationCore(SimConfig{}, w, script), ConfigError);
}

// ---------------------------------------------------------------------------
// Log format

TEST(Log, RoundTrip) {
  const std::string text = sample_log();
  const auto log = fixture::parse_log(text);
  EXPECT_EQ(log.header.at("seed"), 3);
  ASSERT_EQ(log.ground_truth.size(), 5u);
  EXPECT_EQ(log.ground_truth[2].position, Vec3(0.30000000000000004, 0.0, 1.0));
  ASSERT_EQ(log.events.size(), 1u);
  EXPECT_EQ(log.events[0].phase, Phase::planning);
  EXPECT_EQ(log.events[0].data.at("x"), 1.5);
  ASSERT_TRUE(log.end);
  EXPECT_EQ(log.end->verdict, "success");
  EXPECT_EQ(log.end->seq, 6u);
}

TEST(Log, CorruptByteTruncatesWithOffset) {
  const std::string text = sample_log();
  const auto starts = line_starts(text);
  ASSERT_GE(starts.size(), 5u);
  std::string bad = text;
  bad[starts[4] + 20] ^= 0x01;  // inside the fourth record
  try {
    fixture::parse_log(bad);
    FAIL() << "expected TruncatedStreamError";
  } catch (const TruncatedStreamError& e) {
    EXPECT_EQ(e.last_valid_offset(), starts[4]);
    EXPECT_EQ(e.line(), 5u);
    EXPECT_EQ(e.partial().ground_truth.size(), 3u);
    EXPECT_EQ(e.partial().ground_truth[2].position.x(), fixture::parse_log(text).ground_truth[2].position.x());
  }
}

TEST(Log, MissingNewlineAtEndIsTruncation) {
  std::string text = sample_log();
  text.pop_back();
  EXPECT_THROW(fixture::parse_log(text), TruncatedStreamError);
}

TEST(Log, SchemaMismatch) {
  std::string text = sample_log();
  const auto nl = text.find('\n');
  auto header = nlohmann::json::parse(text.substr(9, nl - 9));
  header["version"] = 99;
  const std::string body = header.dump();
  const std::string rewritten = detail::frame_line(body) + text.substr(nl + 1);
  try {
    fixture::parse_log(rewritten);
    FAIL() << "expected LogSchemaError";
  } catch (const LogSchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
  EXPECT_THROW(fixture::parse_log(""), LogSchemaError);
  EXPECT_THROW(fixture::parse_log(detail::frame_line(R"({"k":"gt"})")), LogSchemaError);
}

TEST(Log, FrameIsCrcThenJson) {
  const std::string line = detail::frame_line("{}");
  EXPECT_EQ(line.size(), 8u + 1u + 2u + 1u);
  EXPECT_EQ(line.substr(8), " {}\n");
  // CRC-32 (IEEE) of "123456789" is the standard check value.
  EXPECT_EQ(detail::crc32("123456789"), 0xCBF43926u);
}

TEST(CloudFile, WriteThenReadBack) {
  const auto path = std::filesystem::temp_directory_path() / "navsim_cloud_test.bin";
  PointCloud a, b;
  a.points = {Eigen::Vector3f(1, 2, 3)};
  b.points = {Eigen::Vector3f(4, 5, 6), Eigen::Vector3f(-1, 0.5f, 2)};
  std::uint64_t off_b = 0;
  {
    CloudWriter w(path.string());
    EXPECT_EQ(w.write(0.1, a), 8u);
    off_b = w.write(0.2, b);
  }
  std::ifstream in(path, std::ios::binary);
  double t = 0.0;
  const auto back = read_cloud(in, off_b, &t);
  EXPECT_EQ(t, 0.2);
  ASSERT_EQ(back.points.size(), 2u);
  EXPECT_EQ(back.points[1], b.points[1]);
  std::filesystem::remove(path);
}
