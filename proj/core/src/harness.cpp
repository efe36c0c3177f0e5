#include "smrl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smrl/envlike.hpp"
#include "smrl/rng.hpp"

namespace smrl {

using nlohmann::json;

void ExperimentConfig::validate() const {
  require(!seeds.empty(), "experiment config: need at least one seed");
  require(std::is_sorted(budgets.begin(), budgets.end()),
          "experiment config: budgets must be sorted ascending");
  require(std::is_sorted(baseline_budgets.begin(), baseline_budgets.end()),
          "experiment config: baseline budgets must be sorted ascending");
  require(val_fraction > 0.0 && val_fraction < 1.0,
          "experiment config: val_fraction must be in (0, 1)");
  validate_task(default_task(task), make_descriptor(env));
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct TrainedModel {
  SelfModel model;
  Dataset train;
  TrainHistory history;
};

TrainedModel collect_and_train(const ExperimentConfig& cfg, long budget,
                               std::uint64_t seed, StepCounter& counter) {
  EnvDescriptor desc = make_descriptor(cfg.env);
  Dataset ds = collect_random(desc, static_cast<std::size_t>(budget), cfg.episode_len,
                              derive_seed(seed, "pipeline/collect"), &counter);
  std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction *
                                               static_cast<double>(ds.total_transitions()));
  n_val = std::max(n_val, std::min(cfg.episode_len, ds.total_transitions() / 2));
  SplitResult sp = split(ds, 0, n_val, derive_seed(seed, "pipeline/split"));

  TrainedModel tm;
  NormStats norm = compute_norm_stats(sp.train);
  tm.model = make_self_model(desc.state_dim, desc.action_dim, cfg.model, norm,
                             derive_seed(seed, "pipeline/model_init"));
  tm.history = train_self_model(tm.model, sp.train, sp.val,
                                derive_seed(seed, "pipeline/model_train"));
  tm.train = std::move(sp.train);
  return tm;
}

MetricsRecord eval_on_real(const ExperimentConfig& cfg, const TaskSpec& task,
                           const Policy& policy, std::uint64_t seed) {
  StepCounter eval_counter;
  RealEnv real(make_descriptor(cfg.env), task, &eval_counter);
  EvalResult ev =
      eval_policy(real, policy, cfg.eval_episodes, derive_seed(seed, "pipeline/real_eval"));
  MetricsRecord rec;
  rec.eval_real_steps = eval_counter.steps;
  rec.eval_return_mean = ev.ret_mean;
  rec.eval_return_std = ev.ret_std;
  rec.aux_max_z = ev.max_z_mean;
  rec.aux_x_disp = ev.x_disp_mean;
  return rec;
}

PpoResult train_policy_in_model(const ExperimentConfig& cfg, const SelfModel& model,
                                const TaskSpec& task, const Dataset& train_ds,
                                std::uint64_t seed) {
  std::vector<EnvState> seeds_pool = episode_initial_states(train_ds);
  ModelEnv env(model, task, seeds_pool, cfg.ppo.horizon);
  ModelEnv eval_env(model, task, seeds_pool, cfg.ppo.horizon);
  PPOConfig pcfg = cfg.ppo;
  pcfg.total_steps = cfg.model_ppo_steps;
  return ppo_train(env, &eval_env, pcfg, derive_seed(seed, "pipeline/ppo"));
}

}  // namespace

PipelineArtifacts run_selfmodel_pipeline(const ExperimentConfig& cfg, long budget,
                                         std::uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  StepCounter counter;
  TrainedModel tm = collect_and_train(cfg, budget, seed, counter);
  require(counter.steps == budget,
          "pipeline accounting: collection consumed " + std::to_string(counter.steps) +
              " real steps, budget was " + std::to_string(budget));

  TaskSpec task = default_task(cfg.task);
  task.horizon = cfg.ppo.horizon;
  PpoResult ppo = train_policy_in_model(cfg, tm.model, task, tm.train, seed);

  // the model-side training must not have touched the real environment
  require(counter.steps == budget, "pipeline accounting: real steps grew during model PPO");

  PipelineArtifacts out;
  out.record = eval_on_real(cfg, task, ppo.policy, seed);
  out.record.method = "selfmodel_ppo";
  out.record.budget = budget;
  out.record.seed = seed;
  out.record.real_transitions_used = counter.steps;
  out.record.wall_seconds = seconds_since(t0);
  out.model = std::move(tm.model);
  out.policy = std::move(ppo.policy);
  out.model_history = std::move(tm.history);
  out.ppo_curve = std::move(ppo.curve);
  return out;
}

BaselineArtifacts run_baseline(const ExperimentConfig& cfg, long budget,
                               std::uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  TaskSpec task = default_task(cfg.task);
  task.horizon = cfg.ppo.horizon;
  EnvDescriptor desc = make_descriptor(cfg.env);

  StepCounter train_counter;
  RealEnv env(desc, task, &train_counter);
  StepCounter eval_counter;
  RealEnv eval_env(desc, task, &eval_counter);

  PPOConfig pcfg = cfg.ppo;
  pcfg.total_steps = budget;
  PpoResult ppo = ppo_train(env, &eval_env, pcfg, derive_seed(seed, "baseline/ppo"));
  require(train_counter.steps == budget,
          "baseline accounting: trained on " + std::to_string(train_counter.steps) +
              " real steps, budget was " + std::to_string(budget));

  BaselineArtifacts out;
  out.record = eval_on_real(cfg, task, ppo.policy, seed);
  out.record.method = "baseline_ppo";
  out.record.budget = budget;
  out.record.seed = seed;
  out.record.real_transitions_used = train_counter.steps;
  out.record.eval_real_steps += eval_counter.steps;  // periodic + final eval itemized
  out.record.wall_seconds = seconds_since(t0);
  out.policy = std::move(ppo.policy);
  out.curve = std::move(ppo.curve);
  return out;
}

namespace {

// smallest budget whose interpolated return reaches the target
std::optional<double> first_crossing(const std::vector<CurveSample>& curve, double target) {
  if (curve.empty()) return std::nullopt;
  if (curve.front().ret >= target) return static_cast<double>(curve.front().budget);
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    double r0 = curve[i].ret, r1 = curve[i + 1].ret;
    if (r1 >= target) {
      double b0 = static_cast<double>(curve[i].budget);
      double b1 = static_cast<double>(curve[i + 1].budget);
      if (r1 == r0) return b1;
      double f = (target - r0) / (r1 - r0);
      return b0 + f * (b1 - b0);
    }
  }
  return std::nullopt;
}

}  // namespace

ReductionFactor data_reduction_factor(const std::vector<CurveSample>& model_curve,
                                      const std::vector<CurveSample>& baseline_curve,
                                      double target_return) {
  require(std::is_sorted(model_curve.begin(), model_curve.end(),
                         [](auto& a, auto& b) { return a.budget < b.budget; }),
          "data_reduction_factor: model curve must be sorted by budget");
  require(std::is_sorted(baseline_curve.begin(), baseline_curve.end(),
                         [](auto& a, auto& b) { return a.budget < b.budget; }),
          "data_reduction_factor: baseline curve must be sorted by budget");

  std::optional<double> model_b = first_crossing(model_curve, target_return);
  std::optional<double> base_b = first_crossing(baseline_curve, target_return);
  if (!model_b.has_value()) {
    std::ostringstream msg;
    msg << "data_reduction_factor: target " << target_return << " not comparable ("
        << (base_b.has_value() ? "self-model curve never reaches it"
                               : "neither curve reaches it")
        << ")";
    throw std::runtime_error(msg.str());
  }

  ReductionFactor rf;
  rf.model_budget = static_cast<long>(std::llround(*model_b));
  if (!base_b.has_value()) {
    rf.baseline_unreachable = true;
    rf.factor = std::numeric_limits<double>::infinity();
    rf.baseline_budget = baseline_curve.empty() ? 0 : baseline_curve.back().budget;
    return rf;
  }
  rf.baseline_budget = static_cast<long>(std::llround(*base_b));
  rf.factor = *base_b / *model_b;
  return rf;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepResult out;

  for (long budget : cfg.budgets)
    for (std::uint64_t seed : cfg.seeds)
      out.records.push_back(run_selfmodel_pipeline(cfg, budget, seed).record);
  for (long budget : cfg.baseline_budgets)
    for (std::uint64_t seed : cfg.seeds)
      out.records.push_back(run_baseline(cfg, budget, seed).record);

  auto mean_curve = [&](const std::string& method) {
    std::vector<CurveSample> curve;
    std::vector<long> budgets = method == "selfmodel_ppo" ? cfg.budgets : cfg.baseline_budgets;
    for (long b : budgets) {
      double sum = 0.0, sumsq = 0.0;
      int n = 0;
      for (const MetricsRecord& r : out.records)
        if (r.method == method && r.budget == b) {
          sum += r.eval_return_mean;
          sumsq += r.eval_return_mean * r.eval_return_mean;
          ++n;
        }
      if (n > 0) {
        double m = sum / n;
        curve.push_back({b, m});
        out.summary.push_back(
            {method, b, m, std::sqrt(std::max(0.0, sumsq / n - m * m))});
      }
    }
    return curve;
  };

  std::vector<CurveSample> model_curve = mean_curve("selfmodel_ppo");
  std::vector<CurveSample> base_curve = mean_curve("baseline_ppo");
  for (double target : cfg.target_returns) {
    try {
      out.reduction_factors.emplace_back(
          target, data_reduction_factor(model_curve, base_curve, target));
    } catch (const std::runtime_error&) {
      // target unreachable by the self-model curve: skip the row
    }
  }
  return out;
}

TransferResult run_transfer(const ExperimentConfig& cfg, long budget, std::uint64_t seed) {
  require(cfg.env == EnvId::kPointHopper, "run_transfer: point_hopper only");
  auto t0 = std::chrono::steady_clock::now();

  StepCounter counter;
  TrainedModel tm = collect_and_train(cfg, budget, seed, counter);
  require(counter.steps == budget, "transfer accounting: collection exceeded budget");

  TaskSpec forward_task = default_task(TaskId::kForward);
  forward_task.horizon = cfg.ppo.horizon;
  TaskSpec jump_task = default_task(TaskId::kJump);
  jump_task.horizon = cfg.ppo.horizon;

  PpoResult fw = train_policy_in_model(cfg, tm.model, forward_task, tm.train,
                                       derive_seed(seed, "transfer/forward"));
  PpoResult jp = train_policy_in_model(cfg, tm.model, jump_task, tm.train,
                                       derive_seed(seed, "transfer/jump"));
  require(counter.steps == budget,
          "transfer accounting: model-side training touched the real environment");

  Policy untrained = make_policy(make_descriptor(cfg.env).state_dim,
                                 make_descriptor(cfg.env).action_dim,
                                 derive_seed(seed, "transfer/untrained"));

  TransferResult out;
  double wall = seconds_since(t0);

  out.forward = eval_on_real(cfg, forward_task, fw.policy, derive_seed(seed, "ev/f"));
  out.forward.method = "selfmodel_ppo";
  out.forward.budget = budget;
  out.forward.seed = seed;
  out.forward.real_transitions_used = counter.steps;
  out.forward.wall_seconds = wall;

  out.jump = eval_on_real(cfg, jump_task, jp.policy, derive_seed(seed, "ev/j"));
  out.jump.method = "selfmodel_ppo";
  out.jump.budget = budget;
  out.jump.seed = seed;
  out.jump.real_transitions_used = counter.steps;

  // untrained baseline measured without early termination so the z trace
  // spans the whole horizon
  out.untrained = eval_on_real(cfg, forward_task, untrained, derive_seed(seed, "ev/u"));
  out.untrained.method = "untrained";
  out.untrained.budget = 0;
  out.untrained.seed = seed;
  out.untrained.real_transitions_used = 0;

  // one fixed episode per policy for the z-vs-time comparison
  auto trace = [&](const Policy& p) {
    StepCounter c;
    RealEnv env(make_descriptor(cfg.env), forward_task, &c);
    std::vector<double> zs;
    EnvState s = env.reset(derive_seed(seed, "transfer/trace"));
    zs.push_back(s[hopper::kZ]);
    bool done = false;
    while (!done) {
      EnvLike::Step st = env.step(policy_mean(p, s));
      zs.push_back(st.state[hopper::kZ]);
      s = st.state;
      done = st.done;
    }
    return zs;
  };
  out.z_forward = trace(fw.policy);
  out.z_jump = trace(jp.policy);
  out.z_untrained = trace(untrained);
  out.model_history = std::move(tm.history);
  out.forward_policy = std::move(fw.policy);
  out.jump_policy = std::move(jp.policy);
  out.untrained_policy = std::move(untrained);
  return out;
}

void emit_report(const std::vector<MetricsRecord>& records, const SweepResult* sweep,
                 const std::string& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream os(dir + "/records.csv");
    if (!os) throw std::runtime_error("emit_report: cannot open records.csv");
    os << "method,budget,seed,real_transitions_used,eval_real_steps,"
          "eval_return_mean,eval_return_std,aux_max_z,aux_x_disp\n";
    os.precision(17);
    for (const MetricsRecord& r : records)
      os << r.method << "," << r.budget << "," << r.seed << "," << r.real_transitions_used
         << "," << r.eval_real_steps << "," << r.eval_return_mean << "," << r.eval_return_std
         << "," << r.aux_max_z << "," << r.aux_x_disp << "\n";
  }

  {
    // wall clock is machine-dependent; reruns compare everything but this
    std::ofstream os(dir + "/timing.csv");
    os << "method,budget,seed,wall_seconds\n";
    os.precision(6);
    for (const MetricsRecord& r : records)
      os << r.method << "," << r.budget << "," << r.seed << "," << r.wall_seconds << "\n";
  }

  json summary;
  summary["records"] = records.size();
  if (sweep) {
    json rows = json::array();
    for (const SweepSummaryRow& s : sweep->summary) {
      json row;
      row["method"] = s.method;
      row["budget"] = s.budget;
      row["return_mean"] = s.ret_mean;
      row["return_std"] = s.ret_std;
      rows.push_back(row);
    }
    summary["per_budget"] = rows;
    json rf = json::array();
    for (const auto& [target, r] : sweep->reduction_factors) {
      json row;
      row["target_return"] = target;
      row["baseline_unreachable"] = r.baseline_unreachable;
      row["factor"] = r.baseline_unreachable ? json() : json(r.factor);
      row["model_budget"] = r.model_budget;
      row["baseline_budget"] = r.baseline_budget;
      rf.push_back(row);
    }
    summary["reduction_factors"] = rf;

    std::ofstream curves(dir + "/curves.csv");
    curves << "method,budget,return_mean,return_std\n";
    curves.precision(17);
    for (const SweepSummaryRow& s : sweep->summary)
      curves << s.method << "," << s.budget << "," << s.ret_mean << "," << s.ret_std << "\n";
  }
  std::ofstream os(dir + "/summary.json");
  if (!os) throw std::runtime_error("emit_report: cannot open summary.json");
  os << summary.dump(2) << "\n";
}

}  // namespace smrl
