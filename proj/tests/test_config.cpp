#include "catch_amalgamated.hpp"
#include "lockloss/config.hpp"

using namespace lockloss;

TEST_CASE("config parsing", "[config]") {
  const auto cfg = ExperimentConfig::parse(
      "# experiment\n"
      "order = 2\n"
      "  epsilon_grid = 0.5, 0.4 ,0.25   # trailing comment\n"
      "\n"
      "grid-points=4001\n"
      "label = smoother run\n");
  CHECK(cfg.get_int("order") == 2);
  CHECK(cfg.get_double_list("epsilon-grid") == std::vector<double>{0.5, 0.4, 0.25});
  CHECK(cfg.get_uint64("grid_points") == 4001);
  CHECK(cfg.get_string("label") == "smoother run");
  CHECK(cfg.has("grid_points"));
  CHECK_FALSE(cfg.has("runs"));
}

TEST_CASE("defaults are recorded", "[config]") {
  ExperimentConfig cfg;
  cfg.set("epsilon", "0.25");
  CHECK(cfg.get_double("epsilon") == 0.25);
  CHECK(cfg.get_int("runs", 2000) == 2000);
  CHECK(cfg.get_double("dt", 0.01) == 0.01);
  const auto& r = cfg.resolved();
  CHECK(r.at("epsilon") == "0.25");
  CHECK(r.at("runs") == "2000");
  CHECK(r.at("dt") == "0.01");
  CHECK(cfg.entries().size() == 1);
}

TEST_CASE("config errors", "[config]") {
  CHECK_THROWS_AS(ExperimentConfig::parse("order 2\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("= 2\n"), ConfigError);
  const auto cfg = ExperimentConfig::parse("order = two\nruns = -3\nx = 1.5e\nlist = 1,,2\n");
  CHECK_THROWS_AS(cfg.get_int("order"), ConfigError);
  CHECK_THROWS_AS(cfg.get_uint64("runs"), ConfigError);
  CHECK(cfg.get_int("runs") == -3);
  CHECK_THROWS_AS(cfg.get_double("x"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double_list("list"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("missing"), ConfigError);
  CHECK_THROWS_AS(cfg.require("missing"), ConfigError);
}

TEST_CASE("later entries override earlier ones", "[config]") {
  auto cfg = ExperimentConfig::parse("dt = 0.01\ndt = 0.02\n");
  CHECK(cfg.get_double("dt") == 0.02);
  cfg.set("dt", "0.005");
  CHECK(cfg.get_double("dt") == 0.005);
}
