#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "psmrwm/experiment.hpp"

using namespace psmrwm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("PSMRWM_TMP");
  const fs::path base = env ? fs::path(env) : fs::temp_directory_path() / "psmrwm_experiment_test";
  const fs::path p = base / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_synthetic(const fs::path& out) {
  ExperimentConfig c;
  c.mode = ExperimentMode::synthetic;
  c.synthetic_d = 3;
  c.lambda_list = {0.6, 1.4};
  c.m_list = {10, 40};
  c.iters = 2000;
  c.max_iters = 8000;
  c.min_ess_floor = 300;
  c.pilot_iters = 2000;
  c.noise_reps = 200;
  c.timing = TimingMode::cost;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = config_from_json(R"({"mode": "synthetic", "lambda_list": [0.5], "m_list": [7], "iters": 100,
                                     "timing": "cost", "seed": 5})");
  CHECK(c.mode == ExperimentMode::synthetic);
  CHECK(c.lambda_list == std::vector<double>{0.5});
  CHECK(c.m_list == std::vector<int>{7});
  CHECK(c.iters == 100);
  CHECK(c.max_iters == 100);
  CHECK(c.timing == TimingMode::cost);
  CHECK(c.seed == 5);

  const auto defaults = config_from_json("{}");
  CHECK(defaults.lambda_list == std::vector<double>{0.2, 0.4, 0.6, 0.7, 0.8, 1.0, 1.2, 1.4, 1.6});
  CHECK(defaults.m_list == std::vector<int>{10, 20, 40, 100, 200, 400, 1000});
  CHECK(defaults.min_ess_floor == 1000.0);

  CHECK_THROWS(config_from_json(R"({"lambda_list": []})"));
  CHECK_THROWS(config_from_json(R"({"iters": 0})"));
  CHECK_THROWS(config_from_json(R"({"bogus": 1})"));
  CHECK_THROWS(config_from_json(R"({"mode": "other"})"));
  CHECK_THROWS(config_from_json(R"({"iters": 100, "max_iters": 50})"));

  const auto round = config_from_json(config_to_json(c));
  CHECK(config_to_json(round) == config_to_json(c));
}

TEST_CASE("1x1 exact-target grid") {
  auto c = small_synthetic(scratch("one"));
  c.exact_target = true;
  c.lambda_list = {1.0};
  c.m_list = {10};
  const auto out = run_grid_experiment(c);
  REQUIRE(out.table.rows.size() == 1);
  CHECK(out.table.rows[0].ess_star == 1.0);
  CHECK(out.table.rows[0].ess_starstar == 1.0);
  CHECK(out.noise[0].degenerate);
  for (const char* f : {"efficiency.csv", "cells.csv", "noise.csv", "noise_kde.csv", "pilot.csv"})
    CHECK(fs::exists(fs::path(c.output_dir) / f));
  const auto eff = slurp(fs::path(c.output_dir) / "efficiency.csv");
  CHECK(eff.rfind("m,lambda,min_ess,wall_s,ess_per_s,ess_star,ess_starstar,accept_rate,noise_var\n", 0) == 0);
}

TEST_CASE("doubling stops at the floor or the budget") {
  auto c = small_synthetic(scratch("doubling"));
  const auto out = run_grid_experiment(c);
  REQUIRE(out.cells.size() == 4);
  for (const auto& cell : out.cells) {
    CHECK(cell.iters >= c.iters);
    CHECK(cell.iters <= c.max_iters);
    if (cell.result.min_ess < c.min_ess_floor) {
      CHECK(cell.iters == c.max_iters);
      CHECK(cell.budget_exhausted);
    } else {
      CHECK_FALSE(cell.budget_exhausted);
    }
  }
  // cells are m-major, lambda-minor
  CHECK(out.cells[0].result.m == 10);
  CHECK(out.cells[1].result.lambda == 1.4);
  CHECK(out.cells[2].result.m == 40);
  // noise variance scales as 1/m
  CHECK(out.noise[0].variance > out.noise[1].variance);
}

TEST_CASE("re-runs are byte-identical, whatever the thread count") {
  auto a = small_synthetic(scratch("rerun_a"));
  auto b = small_synthetic(scratch("rerun_b"));
  a.threads = 1;
  b.threads = 3;
  run_grid_experiment(a);
  run_grid_experiment(b);
  for (const char* f : {"efficiency.csv", "cells.csv", "noise.csv", "noise_kde.csv", "pilot.csv"}) {
    INFO(f);
    CHECK(slurp(fs::path(a.output_dir) / f) == slurp(fs::path(b.output_dir) / f));
  }
}

TEST_CASE("wall time grows with m on the GP target") {
  ExperimentConfig c;
  c.mode = ExperimentMode::gp;
  c.lambda_list = {0.6};
  c.m_list = {10, 1000};
  c.iters = c.max_iters = 200;
  c.pilot_iters = 100;
  c.pilot_m = 10;
  c.noise_reps = 100;
  c.threads = 1;
  c.output_dir = scratch("gp_cost").string();
  const auto out = run_grid_experiment(c);
  REQUIRE(out.cells.size() == 2);
  CHECK(out.cells[1].result.wall_seconds > out.cells[0].result.wall_seconds);
  CHECK(fs::exists(fs::path(c.output_dir) / "dataset.json"));
}
