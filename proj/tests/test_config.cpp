#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "avabc/config.hpp"

using namespace avabc;

namespace {

ConfigError parse_error(const std::string& text) {
  try {
    config_from_json(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("no ConfigError for: " << text);
  return ConfigError("", "");
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("presets round-trip through JSON") {
    for (const auto& name : preset_names()) {
      const auto p = preset(name);
      const std::string text = config_to_json(p);
      const auto back = config_from_json(text);
      CHECK(config_to_json(back) == text);
      CHECK(back.observation.statistics == p.observation.statistics);
      CHECK_NOTHROW(to_run_config(back).validate());
    }
  }

  TEST_CASE("preset contents") {
    const auto b = preset("bernoulli");
    CHECK(b.simulator.trials == 100);
    CHECK(b.observation.statistics == std::vector<double>{70.0});
    CHECK(b.samples == 10);
    CHECK(b.simulations == 10);
    const auto f = preset("blowfly");
    CHECK(f.observation.statistics.size() == 10);
    CHECK(f.observation.provenance.kind == Provenance::Kind::kSynthetic);
    CHECK(f.prior.dim() == 5);
    CHECK_THROWS_AS(preset("lotka_volterra"), Error);
  }

  TEST_CASE("blowfly thresholds follow the observed series mean") {
    const auto f = preset("blowfly");
    const auto sim = std::dynamic_pointer_cast<const BlowflySimulator>(make_simulator(f));
    REQUIRE(sim);
    double mean = 0.0;
    for (double x : f.observation.raw) mean += x;
    mean /= static_cast<double>(f.observation.raw.size());
    CHECK(sim->config().peak_thresholds[0] == doctest::Approx(mean));
    CHECK(sim->config().peak_thresholds[1] == doctest::Approx(1.5 * mean));
  }

  TEST_CASE("partial documents layer over a base preset") {
    const auto c = config_from_json(R"({"preset": "bernoulli", "seed": 9, "samples": 3,
                                        "optimizer": {"kind": "adagrad"}})");
    CHECK(c.seed == 9);
    CHECK(c.samples == 3);
    CHECK(c.simulations == 10);
    CHECK(c.optimizer.kind == OptimizerKind::kAdagrad);
    CHECK(c.optimizer.learning_rate == OptimizerSpec::adagrad().learning_rate);
  }

  TEST_CASE("diagnostics name the field and line") {
    {
      const auto e = parse_error("{\n  \"preset\": \"bernoulli\",\n  \"sammples\": 3\n}");
      CHECK(e.field() == "sammples");
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("config:3") != std::string::npos);
    }
    {
      const auto e = parse_error("{\n  \"preset\": \"bernoulli\",\n  \"optimizer\": {\n    \"learning_rate\": \"fast\"\n  }\n}");
      CHECK(e.field() == "optimizer.learning_rate");
      CHECK(e.line() == 4);
    }
    {
      const auto e = parse_error(R"({"preset": "bernoulli", "samples": -2})");
      CHECK(e.field() == "samples");
    }
    {
      const auto e = parse_error(R"({"preset": "bernoulli", "prior": {"kind": "beta", "alpha": 0}})");
      CHECK(e.field() == "prior");
    }
    CHECK_THROWS_AS(config_from_json("{ not json"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"format": "avabc-config/9"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"preset": "bernoulli", "estimator": "reinforce"})"), ConfigError);
  }

  TEST_CASE("observation must match the simulator") {
    auto c = preset("bernoulli");
    c.observation.simulator = "exponential";
    CHECK_THROWS(to_run_config(c));
    c = preset("bernoulli");
    c.observation.statistics = {1.0, 2.0};
    CHECK_THROWS(to_run_config(c));
  }

  TEST_CASE("files and relative observation paths") {
    const auto dir = std::filesystem::temp_directory_path() / "avabc_config_test";
    std::filesystem::create_directories(dir);
    {
      std::ofstream obs(dir / "obs.json");
      obs << R"({"format": "avabc-observation/1", "simulator": "bernoulli", "statistics": [64]})";
    }
    {
      std::ofstream cfg(dir / "exp.json");
      cfg << R"({"preset": "bernoulli", "name": "custom", "observation": {"file": "obs.json"}})";
    }
    const auto c = load_config(dir / "exp.json");
    CHECK(c.name == "custom");
    CHECK(c.observation.statistics == std::vector<double>{64.0});
    save_config(c, dir / "saved.json");
    CHECK(load_config(dir / "saved.json").observation.statistics == std::vector<double>{64.0});
    CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
    std::filesystem::remove_all(dir);
  }
}
