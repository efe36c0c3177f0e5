#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smrl/dataset.hpp"
#include "smrl/ppo.hpp"
#include "smrl/selfmodel.hpp"
#include "smrl/task.hpp"

namespace smrl {

struct ExperimentConfig {
  EnvId env = EnvId::kPendulum;
  TaskId task = TaskId::kPendulumUpright;
  std::vector<long> budgets;           // real-data budgets for the model pipeline
  std::vector<long> baseline_budgets;  // real-step budgets for vanilla PPO
  std::vector<std::uint64_t> seeds{1};
  std::size_t episode_len = 200;
  double val_fraction = 0.1;
  int eval_episodes = 20;
  long model_ppo_steps = 300000;  // model-environment steps per policy
  std::vector<double> target_returns;
  SelfModelConfig model;
  PPOConfig ppo;
  std::string out_dir = "out";

  void validate() const;
};

struct MetricsRecord {
  std::string method;  // selfmodel_ppo | baseline_ppo | untrained
  long budget = 0;
  std::uint64_t seed = 0;
  long real_transitions_used = 0;  // from the instrumented counter, not config
  long eval_real_steps = 0;        // itemized separately, excluded from the budget
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double aux_max_z = 0.0;
  double aux_x_disp = 0.0;
  double wall_seconds = 0.0;  // reported in the timing sidecar only
};

struct PipelineArtifacts {
  MetricsRecord record;
  SelfModel model;
  Policy policy;
  TrainHistory model_history;
  std::vector<CurvePoint> ppo_curve;
};

// collect -> train self-model -> PPO inside the model -> evaluate on the
// real environment. Real usage is exactly `budget` plus itemized eval.
PipelineArtifacts run_selfmodel_pipeline(const ExperimentConfig& cfg, long budget,
                                         std::uint64_t seed);

struct BaselineArtifacts {
  MetricsRecord record;
  Policy policy;
  std::vector<CurvePoint> curve;
};
// Vanilla PPO directly on the real environment for exactly `budget` steps.
BaselineArtifacts run_baseline(const ExperimentConfig& cfg, long budget, std::uint64_t seed);

// One point per budget, seed-mean return, sorted by budget.
struct CurveSample {
  long budget;
  double ret;
};

struct ReductionFactor {
  double factor = 0.0;
  bool baseline_unreachable = false;  // flagged infinity
  long model_budget = 0;
  long baseline_budget = 0;
};

// (smallest baseline budget reaching target) / (smallest self-model budget
// reaching target) under piecewise-linear interpolation. If the baseline
// never reaches the target inside its largest budget the factor is a
// flagged infinity; if the self-model curve never reaches it either, the
// comparison is meaningless and this throws.
ReductionFactor data_reduction_factor(const std::vector<CurveSample>& model_curve,
                                      const std::vector<CurveSample>& baseline_curve,
                                      double target_return);

struct SweepSummaryRow {
  std::string method;
  long budget;
  double ret_mean;
  double ret_std;
};

struct SweepResult {
  std::vector<MetricsRecord> records;
  std::vector<SweepSummaryRow> summary;
  std::vector<std::pair<double, ReductionFactor>> reduction_factors;
};
// Full method x budget x seed cross product.
SweepResult run_sweep(const ExperimentConfig& cfg);

struct TransferResult {
  MetricsRecord forward;
  MetricsRecord jump;
  MetricsRecord untrained;
  // z-vs-time traces on the real environment, one fixed-seed episode per
  // policy, no early termination
  std::vector<double> z_forward;
  std::vector<double> z_jump;
  std::vector<double> z_untrained;
  TrainHistory model_history;
  Policy forward_policy;
  Policy jump_policy;
  Policy untrained_policy;
};
// One dataset, one self-model, two tasks: forward and jump policies trained
// with zero additional real transitions, then compared on the real hopper.
TransferResult run_transfer(const ExperimentConfig& cfg, long budget, std::uint64_t seed);

// records.csv + summary.json + plot-ready curve files under `dir`; wall
// clock goes to timing.csv, which reruns are allowed to differ on.
void emit_report(const std::vector<MetricsRecord>& records, const SweepResult* sweep,
                 const std::string& dir);

}  // namespace smrl
