#include "dqnmpc/config.hpp"

#include <doctest.h>

#include <json.hpp>

using namespace dqnmpc;

namespace {

std::string key_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("minimal document gives the defaults") {
  const auto c = parse_config(R"({"schema_version": 1})");
  const ExperimentConfig d;
  CHECK(c.seed == d.seed);
  CHECK(c.n_samples == d.n_samples);
  CHECK(c.scenarios.size() == 6);
  CHECK(c.trajectory.max_speed() == doctest::Approx(4.68).epsilon(1e-6));
  CHECK(dump_config(c) == dump_config(d));
}

TEST_CASE("schema version is required and checked") {
  CHECK(key_of("{}") == "schema_version");
  CHECK(key_of(R"({"schema_version": 2})") == "schema_version");
  CHECK(key_of(R"({"schema_version": 1, )") == "");
}

TEST_CASE("unknown keys are named with their full path") {
  CHECK(key_of(R"({"schema_version": 1, "experimnt": {}})") == "experimnt");
  CHECK(key_of(R"({"schema_version": 1, "experiment": {"n_sampels": 3}})") == "experiment.n_sampels");
  CHECK(key_of(R"({"schema_version": 1, "weights": {"dq": {"Qx": [1]}}})") == "weights.dq.Qx");
  CHECK(key_of(R"({"schema_version": 1, "disturbances": {"scenarios": [{"name": "a", "wind": 1}]}})")
            .find("wind") != std::string::npos);
}

TEST_CASE("type and value errors name the key") {
  CHECK(key_of(R"({"schema_version": 1, "experiment": {"n_samples": "ten"}})") == "experiment.n_samples");
  CHECK(key_of(R"({"schema_version": 1, "experiment": {"seed": -1}})") == "experiment.seed");
  CHECK(key_of(R"({"schema_version": 1, "quadrotor": {"inertia": [1, 2]}})") == "quadrotor.inertia");
  CHECK(key_of(R"({"schema_version": 1, "solver": {"mode": "fast"}})") == "solver.mode");
  CHECK(key_of(R"({"schema_version": 1, "trajectory": {"v_max": -1}})") == "trajectory.v_max");
  CHECK(key_of(R"({"schema_version": 1, "experiment": {"controller": "pid"}})") == "experiment.controller");
}

TEST_CASE("weights accept a diagonal or a full matrix") {
  const auto a = parse_config(R"({"schema_version": 1, "weights": {"dq": {"R": [1, 2, 3, 4, 5, 6]}}})");
  CHECK(a.dq_weights.R(1, 1) == 2.0);
  CHECK(a.dq_weights.R(0, 1) == 0.0);
  const auto b = parse_config(
      R"({"schema_version": 1, "weights": {"dq": {"R": [[2, 0, 0, 0, 0, 0], [0, 2, 0, 0, 0, 0], [0, 0, 2, 0, 0, 0], [0, 0, 0, 2, 0, 0], [0, 0, 0, 0, 2, 0], [0, 0, 0, 0, 0, 2]]}}})");
  CHECK(b.dq_weights.R(5, 5) == 2.0);
  CHECK(key_of(R"({"schema_version": 1, "weights": {"dq": {"R": [1, 2, -3, 4, 5, 6]}}})") != "<no error>");
}

TEST_CASE("dump and parse round trip") {
  ExperimentConfig c;
  c.seed = 99;
  c.n_samples = 7;
  c.controller = ControllerSelection::dq;
  c.scenarios.resize(2);
  c.scenarios[1].dist.ext_force = Vec3(1.0, 2.0, 3.0);
  c.solver.max_sqp_iter = 33;
  c.trajectory = make_circle(Vec3(0.0, 0.0, 1.0), 1.5, 0.7, 12.0);
  const std::string d = dump_config(c);
  const auto back = parse_config(d);
  CHECK(back.seed == 99);
  CHECK(back.n_samples == 7);
  CHECK(back.controller == ControllerSelection::dq);
  CHECK(back.scenarios.size() == 2);
  CHECK(back.scenarios[1].dist.ext_force == Vec3(1.0, 2.0, 3.0));
  CHECK(back.solver.max_sqp_iter == 33);
  CHECK(back.trajectory.kind == TrajectoryKind::circle);
  CHECK(dump_config(back) == d);
  CHECK(nlohmann::json::parse(d)["schema_version"] == kSchemaVersion);
}

TEST_CASE("missing config file is a config error") {
  CHECK_THROWS_AS(load_config("/nonexistent/dir/cfg.json"), ConfigError);
}
