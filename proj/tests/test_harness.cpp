#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "smrl/config.hpp"
#include "smrl/harness.hpp"

using namespace smrl;

namespace {

// small-but-real experiment config for fast end-to-end runs
ExperimentConfig smoke_config() {
  ExperimentConfig cfg;
  cfg.env = EnvId::kPendulum;
  cfg.task = TaskId::kPendulumUpright;
  cfg.episode_len = 60;
  cfg.val_fraction = 0.2;
  cfg.eval_episodes = 2;
  cfg.model_ppo_steps = 256;
  cfg.model.hidden_size = 12;
  cfg.model.decoder_hidden = 12;
  cfg.model.n = 10;
  cfg.model.window_stride = 10;
  cfg.model.max_epochs = 2;
  cfg.model.batch_size = 16;
  cfg.ppo.steps_per_batch = 128;
  cfg.ppo.minibatch_size = 64;
  cfg.ppo.update_epochs = 2;
  cfg.ppo.horizon = 30;
  cfg.ppo.eval_episodes = 2;
  cfg.ppo.eval_interval = 1 << 30;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("data reduction factor: the 500x shape") {
  std::vector<CurveSample> model{{1000, 10.0}};
  std::vector<CurveSample> baseline{{100000, 2.0}, {500000, 10.0}, {1000000, 20.0}};
  ReductionFactor rf = data_reduction_factor(model, baseline, 10.0);
  CHECK(rf.factor == doctest::Approx(500.0));
  CHECK(!rf.baseline_unreachable);
}

TEST_CASE("data reduction factor: identical curves give 1") {
  std::vector<CurveSample> curve{{100, -5.0}, {1000, 0.0}, {10000, 5.0}};
  ReductionFactor rf = data_reduction_factor(curve, curve, 0.0);
  CHECK(rf.factor == doctest::Approx(1.0));
}

TEST_CASE("data reduction factor: interpolation between budgets") {
  std::vector<CurveSample> model{{100, 0.0}, {200, 10.0}};
  std::vector<CurveSample> baseline{{1000, 0.0}, {2000, 10.0}};
  // target 5 crosses midway on both: 150 vs 1500
  ReductionFactor rf = data_reduction_factor(model, baseline, 5.0);
  CHECK(rf.factor == doctest::Approx(10.0));
  CHECK(rf.model_budget == 150);
  CHECK(rf.baseline_budget == 1500);
}

TEST_CASE("data reduction factor: baseline never reaching gives flagged infinity") {
  std::vector<CurveSample> model{{1000, 50.0}};
  std::vector<CurveSample> baseline{{100000, 2.0}, {1000000, 5.0}};
  ReductionFactor rf = data_reduction_factor(model, baseline, 50.0);
  CHECK(rf.baseline_unreachable);
  CHECK(std::isinf(rf.factor));
}

TEST_CASE("data reduction factor: unreachable targets are not comparable") {
  std::vector<CurveSample> model{{1000, 1.0}};
  std::vector<CurveSample> baseline{{100000, 2.0}};
  CHECK_THROWS_AS(data_reduction_factor(model, baseline, 50.0), std::runtime_error);
  CHECK_THROWS_AS(data_reduction_factor(model, baseline, 1.5), std::runtime_error);
}

TEST_CASE("baseline run consumes exactly the budget and is deterministic") {
  ExperimentConfig cfg = smoke_config();
  BaselineArtifacts a = run_baseline(cfg, 256, 5);
  CHECK(a.record.method == "baseline_ppo");
  CHECK(a.record.real_transitions_used == 256);
  CHECK(a.record.eval_real_steps > 0);

  BaselineArtifacts b = run_baseline(cfg, 256, 5);
  CHECK(a.record.eval_return_mean == b.record.eval_return_mean);
  CHECK(a.record.eval_return_std == b.record.eval_return_std);
}

TEST_CASE("baseline with zero budget reports untrained metrics") {
  ExperimentConfig cfg = smoke_config();
  BaselineArtifacts a = run_baseline(cfg, 0, 9);
  CHECK(a.record.real_transitions_used == 0);
  CHECK(a.record.eval_real_steps > 0);
  CHECK(std::isfinite(a.record.eval_return_mean));
}

TEST_CASE("self-model pipeline accounting: budget plus itemized eval") {
  ExperimentConfig cfg = smoke_config();
  PipelineArtifacts a = run_selfmodel_pipeline(cfg, 240, 3);
  CHECK(a.record.method == "selfmodel_ppo");
  CHECK(a.record.real_transitions_used == 240);
  CHECK(a.record.eval_real_steps == 2 * 30);  // eval_episodes x horizon (no early stop)
  CHECK(std::isfinite(a.record.eval_return_mean));
  CHECK(a.model_history.epochs.size() >= 1);
  CHECK(!a.ppo_curve.empty());
}

TEST_CASE("sweep produces one record per method/budget/seed cell") {
  ExperimentConfig cfg = smoke_config();
  cfg.budgets = {240};
  cfg.baseline_budgets = {128};
  cfg.seeds = {1, 2};
  SweepResult r = run_sweep(cfg);
  CHECK(r.records.size() == 4);
  CHECK(r.summary.size() == 2);
  int selfmodel_rows = 0;
  for (const MetricsRecord& rec : r.records)
    if (rec.method == "selfmodel_ppo") ++selfmodel_rows;
  CHECK(selfmodel_rows == 2);
}

TEST_CASE("emit_report: empty records give a header-only csv, reruns byte-identical") {
  std::string dir =
      (std::filesystem::temp_directory_path() / "smrl_report_test").string();
  emit_report({}, nullptr, dir);
  std::string csv = read_file(dir + "/records.csv");
  CHECK(csv ==
        "method,budget,seed,real_transitions_used,eval_real_steps,"
        "eval_return_mean,eval_return_std,aux_max_z,aux_x_disp\n");

  MetricsRecord rec;
  rec.method = "baseline_ppo";
  rec.budget = 100;
  rec.seed = 1;
  rec.real_transitions_used = 100;
  rec.eval_return_mean = -1.5;
  rec.wall_seconds = 3.25;  // must not leak into records.csv
  emit_report({rec}, nullptr, dir);
  std::string first = read_file(dir + "/records.csv");
  CHECK(first.find("3.25") == std::string::npos);
  rec.wall_seconds = 99.9;
  emit_report({rec}, nullptr, dir);
  CHECK(read_file(dir + "/records.csv") == first);
  CHECK(read_file(dir + "/summary.json").find("records") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config parsing: defaults, overrides, unknown keys named") {
  ExperimentConfig cfg = config_from_json_text(R"({"env":"point_hopper","task":"jump"})");
  CHECK(cfg.env == EnvId::kPointHopper);
  CHECK(cfg.task == TaskId::kJump);
  CHECK(cfg.model.hidden_size == 128);  // untouched default
  CHECK(cfg.ppo.gamma == 0.99);

  cfg = config_from_json_text(R"({"selfmodel":{"hidden_size":32},"ppo":{"gamma":0.9}})");
  CHECK(cfg.model.hidden_size == 32);
  CHECK(cfg.ppo.gamma == 0.9);

  try {
    config_from_json_text(R"({"selfmodel":{"hidden_sizes":32}})");
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("hidden_sizes") != std::string::npos);
  }
  try {
    config_from_json_text(R"({"learning_rate":0.1})");
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
}

TEST_CASE("config round trip through the resolved echo") {
  ExperimentConfig cfg = smoke_config();
  cfg.budgets = {100, 200};
  cfg.seeds = {4, 5, 6};
  cfg.target_returns = {-300.0};
  ExperimentConfig back = config_from_json_text(config_to_json_text(cfg));
  CHECK(back.budgets == cfg.budgets);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.model.hidden_size == cfg.model.hidden_size);
  CHECK(back.ppo.steps_per_batch == cfg.ppo.steps_per_batch);
  CHECK(back.episode_len == cfg.episode_len);
}

TEST_CASE("experiment config validation rejects bad shapes") {
  ExperimentConfig cfg = smoke_config();
  cfg.budgets = {500, 100};  // unsorted
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = smoke_config();
  cfg.seeds = {};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = smoke_config();
  cfg.task = TaskId::kJump;  // jump on pendulum
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
