#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "smrl/config.hpp"
#include "smrl/envlike.hpp"
#include "smrl/harness.hpp"
#include "smrl/ppo.hpp"
#include "smrl/selfmodel.hpp"

using namespace smrl;

namespace {

ExperimentConfig load_cfg_or_default(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  return load_config_file(path);
}

std::vector<int> parse_horizons(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw std::invalid_argument("no horizons given");
  return out;
}

SplitResult split_for_training(const ExperimentConfig& cfg, const Dataset& ds) {
  std::size_t n_val = static_cast<std::size_t>(
      cfg.val_fraction * static_cast<double>(ds.total_transitions()));
  n_val = std::max(n_val, std::min(cfg.episode_len, ds.total_transitions() / 2));
  return split(ds, 0, n_val, ds.seed);
}

int cmd_collect(const std::string& env, long steps, long episode_len, std::uint64_t seed,
                const std::string& out, const std::string& csv) {
  EnvDescriptor desc = make_descriptor(env_from_name(env));
  Dataset ds = collect_random(desc, static_cast<std::size_t>(steps),
                              static_cast<std::size_t>(episode_len), seed);
  save_dataset(ds, out);
  if (!csv.empty()) export_csv(ds, csv);
  std::cout << "collected " << ds.total_transitions() << " transitions over "
            << ds.episodes.size() << " episodes -> " << out << "\n";
  return 0;
}

int cmd_train_model(const std::string& dataset, const std::string& config,
                    std::uint64_t seed, const std::string& out,
                    const std::string& history_path) {
  ExperimentConfig cfg = load_cfg_or_default(config);
  Dataset ds = load_dataset(dataset);
  SplitResult sp = split_for_training(cfg, ds);
  NormStats norm = compute_norm_stats(sp.train);
  SelfModel model = make_self_model(ds.descriptor.state_dim, ds.descriptor.action_dim,
                                    cfg.model, norm, derive_seed(seed, "cli/model_init"));
  TrainHistory hist =
      train_self_model(model, sp.train, sp.val, derive_seed(seed, "cli/model_train"));
  save_model(model, out);
  std::string hist_out = history_path.empty() ? out + ".history.csv" : history_path;
  write_history_csv(hist, hist_out);
  std::cout << "trained on " << sp.train.total_transitions() << " transitions ("
            << hist.train_windows << " windows), validated on "
            << sp.val.total_transitions() << "; best epoch " << hist.best_epoch << " of "
            << hist.epochs.size() << "\nmodel -> " << out << "\nhistory -> " << hist_out
            << "\n";
  return 0;
}

int cmd_eval_model(const std::string& model_path, const std::string& dataset,
                   const std::string& horizons_csv) {
  SelfModel model = load_model(model_path);
  Dataset ds = load_dataset(dataset);
  std::vector<int> horizons = parse_horizons(horizons_csv);
  HorizonMse got = evaluate_horizons(model, ds, horizons);
  HorizonMse pers = persistence_horizons(model, ds, horizons);
  std::cout << "horizon,model_mse,persistence_mse\n";
  for (int h : horizons) {
    if (got.mse.count(h))
      std::cout << h << "," << got.mse.at(h) << "," << pers.mse.at(h) << "\n";
    else
      std::cout << h << ",skipped,skipped\n";
  }
  if (!got.skipped.empty()) {
    std::cerr << "skipped horizons beyond the longest episode:";
    for (int h : got.skipped) std::cerr << " " << h;
    std::cerr << "\n";
  }
  return 0;
}

int cmd_train_policy(const std::string& model_path, const std::string& env,
                     const std::string& dataset, const std::string& task_name_s,
                     const std::string& config, std::uint64_t seed, long steps,
                     const std::string& out, const std::string& curve_path) {
  ExperimentConfig cfg = load_cfg_or_default(config);
  TaskSpec task = default_task(task_from_name(task_name_s));
  task.horizon = cfg.ppo.horizon;
  PPOConfig pcfg = cfg.ppo;
  if (steps > 0) pcfg.total_steps = steps;

  PpoResult res;
  if (!model_path.empty()) {
    if (dataset.empty())
      throw std::invalid_argument("--model training needs --dataset for seed states");
    SelfModel model = load_model(model_path);
    Dataset ds = load_dataset(dataset);
    std::vector<EnvState> seeds = episode_initial_states(ds);
    ModelEnv train_env(model, task, seeds, pcfg.horizon);
    ModelEnv eval_env(model, task, seeds, pcfg.horizon);
    res = ppo_train(train_env, &eval_env, pcfg, derive_seed(seed, "cli/ppo"));
  } else {
    EnvDescriptor desc = make_descriptor(env_from_name(env));
    RealEnv train_env(desc, task);
    RealEnv eval_env(desc, task);
    res = ppo_train(train_env, &eval_env, pcfg, derive_seed(seed, "cli/ppo"));
  }
  save_policy(res.policy, res.value, out);
  std::string curve_out = curve_path.empty() ? out + ".curve.csv" : curve_path;
  write_curve_csv(res.curve, curve_out);
  std::cout << "trained for " << res.env_steps << " steps on "
            << (model_path.empty() ? "real environment" : "self-model") << "\npolicy -> "
            << out << "\ncurve -> " << curve_out << "\n";
  return 0;
}

int cmd_eval_policy(const std::string& policy_path, const std::string& env,
                    const std::string& task_name_s, int episodes, std::uint64_t seed) {
  PolicyCheckpoint ck = load_policy(policy_path);
  TaskSpec task = default_task(task_from_name(task_name_s));
  EnvDescriptor desc = make_descriptor(env_from_name(env));
  RealEnv real(desc, task);
  EvalResult ev = eval_policy(real, ck.policy, episodes, seed);
  std::cout << "episodes," << ev.episodes << "\nreturn_mean," << ev.ret_mean
            << "\nreturn_std," << ev.ret_std << "\nmax_z_mean," << ev.max_z_mean
            << "\nx_disp_mean," << ev.x_disp_mean << "\n";
  return 0;
}

int cmd_benchmark(const std::string& config, const std::string& out) {
  ExperimentConfig cfg = load_config_file(config);
  if (!out.empty()) cfg.out_dir = out;
  SweepResult sweep = run_sweep(cfg);
  emit_report(sweep.records, &sweep, cfg.out_dir);
  write_resolved_config(cfg, cfg.out_dir + "/config_resolved.json");
  std::cout << "sweep complete: " << sweep.records.size() << " records -> " << cfg.out_dir
            << "\n";
  return 0;
}

int cmd_transfer(const std::string& config, const std::string& out, long budget,
                 std::uint64_t seed) {
  ExperimentConfig cfg = load_config_file(config);
  if (!out.empty()) cfg.out_dir = out;
  if (budget <= 0) {
    if (cfg.budgets.empty())
      throw std::invalid_argument("transfer needs --budget or budgets in the config");
    budget = cfg.budgets.front();
  }
  std::uint64_t run_seed = seed != 0 ? seed : cfg.seeds.front();
  TransferResult tr = run_transfer(cfg, budget, run_seed);

  std::filesystem::create_directories(cfg.out_dir);
  emit_report({tr.forward, tr.jump, tr.untrained}, nullptr, cfg.out_dir);
  write_resolved_config(cfg, cfg.out_dir + "/config_resolved.json");
  {
    std::ofstream os(cfg.out_dir + "/z_traces.csv");
    os << "step,z_jump,z_forward,z_untrained\n";
    os.precision(17);
    std::size_t len =
        std::max({tr.z_jump.size(), tr.z_forward.size(), tr.z_untrained.size()});
    auto at = [](const std::vector<double>& v, std::size_t i) {
      return i < v.size() ? v[i] : 0.0;
    };
    for (std::size_t i = 0; i < len; ++i)
      os << i << "," << at(tr.z_jump, i) << "," << at(tr.z_forward, i) << ","
         << at(tr.z_untrained, i) << "\n";
  }
  write_history_csv(tr.model_history, cfg.out_dir + "/model_history.csv");
  std::cout << "transfer complete: one dataset of " << budget
            << " real transitions, two policies\n"
            << "forward: return " << tr.forward.eval_return_mean << ", x-disp "
            << tr.forward.aux_x_disp << ", max-z " << tr.forward.aux_max_z << "\n"
            << "jump:    return " << tr.jump.eval_return_mean << ", x-disp "
            << tr.jump.aux_x_disp << ", max-z " << tr.jump.aux_max_z << "\n"
            << "untrained: max-z " << tr.untrained.aux_max_z << "\nreports -> "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  std::ifstream f(in_dir + "/records.csv");
  if (!f) throw std::runtime_error("cannot open " + in_dir + "/records.csv");
  std::vector<MetricsRecord> records;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    MetricsRecord r;
    std::getline(ss, r.method, ',');
    std::getline(ss, tok, ',');
    r.budget = std::stol(tok);
    std::getline(ss, tok, ',');
    r.seed = std::stoull(tok);
    std::getline(ss, tok, ',');
    r.real_transitions_used = std::stol(tok);
    std::getline(ss, tok, ',');
    r.eval_real_steps = std::stol(tok);
    std::getline(ss, tok, ',');
    r.eval_return_mean = std::stod(tok);
    std::getline(ss, tok, ',');
    r.eval_return_std = std::stod(tok);
    std::getline(ss, tok, ',');
    r.aux_max_z = std::stod(tok);
    std::getline(ss, tok, ',');
    r.aux_x_disp = std::stod(tok);
    records.push_back(r);
  }
  emit_report(records, nullptr, out_dir);
  std::cout << "re-emitted " << records.size() << " records -> " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smrl: learn a recurrent self-model from random transitions, then train "
               "task policies entirely inside it"};
  app.require_subcommand(1);

  // collect
  std::string env = "pendulum", out, csv;
  long steps = 100000, episode_len = 200;
  std::uint64_t seed = 1;
  auto* collect = app.add_subcommand("collect", "Collect random-action transitions");
  collect->add_option("--env", env, "Environment: pendulum|cartpole|point_hopper")
      ->capture_default_str();
  collect->add_option("--steps", steps, "Number of transitions")->capture_default_str();
  collect->add_option("--episode-len", episode_len, "Steps per episode before reset")
      ->capture_default_str();
  collect->add_option("--seed", seed, "Master seed")->capture_default_str();
  collect->add_option("--out", out, "Output dataset (SMD1)")->required();
  collect->add_option("--csv", csv, "Optional CSV export path");

  // train-model
  std::string tm_dataset, tm_config, tm_out, tm_history;
  std::uint64_t tm_seed = 1;
  auto* train_model = app.add_subcommand("train-model", "Train the self-model on a dataset");
  train_model->add_option("--dataset", tm_dataset, "Input dataset (SMD1)")->required();
  train_model->add_option("--config", tm_config, "JSON run configuration");
  train_model->add_option("--seed", tm_seed, "Master seed")->capture_default_str();
  train_model->add_option("--out", tm_out, "Output model (SMM1)")->required();
  train_model->add_option("--history", tm_history, "Training history CSV path");

  // eval-model
  std::string em_model, em_dataset, em_horizons = "1,10,100";
  auto* eval_model =
      app.add_subcommand("eval-model", "Open-loop horizon MSE vs the persistence baseline");
  eval_model->add_option("--model", em_model, "Model file (SMM1)")->required();
  eval_model->add_option("--dataset", em_dataset, "Evaluation dataset (SMD1)")->required();
  eval_model->add_option("--horizons", em_horizons, "Comma-separated horizons")
      ->capture_default_str();

  // train-policy
  std::string tp_model, tp_env = "pendulum", tp_dataset, tp_task = "pendulum", tp_config,
              tp_out, tp_curve;
  std::uint64_t tp_seed = 1;
  long tp_steps = 0;
  auto* train_policy =
      app.add_subcommand("train-policy", "PPO on the self-model or the real environment");
  train_policy->add_option("--model", tp_model, "Self-model (SMM1); trains inside the model");
  train_policy->add_option("--env", tp_env, "Real environment (when --model is absent)")
      ->capture_default_str();
  train_policy->add_option("--dataset", tp_dataset,
                           "Dataset providing reset seed states (required with --model)");
  train_policy->add_option("--task", tp_task, "Task: forward|jump|pendulum")
      ->capture_default_str();
  train_policy->add_option("--config", tp_config, "JSON run configuration");
  train_policy->add_option("--seed", tp_seed, "Master seed")->capture_default_str();
  train_policy->add_option("--steps", tp_steps, "Override total PPO env steps");
  train_policy->add_option("--out", tp_out, "Output policy (SMP1)")->required();
  train_policy->add_option("--curve", tp_curve, "Learning-curve CSV path");

  // eval-policy
  std::string ep_policy, ep_env = "pendulum", ep_task = "pendulum";
  int ep_episodes = 20;
  std::uint64_t ep_seed = 1;
  auto* eval_policy_cmd =
      app.add_subcommand("eval-policy", "Deterministic evaluation on the real environment");
  eval_policy_cmd->add_option("--policy", ep_policy, "Policy file (SMP1)")->required();
  eval_policy_cmd->add_option("--env", ep_env, "Environment")->capture_default_str();
  eval_policy_cmd->add_option("--task", ep_task, "Task")->capture_default_str();
  eval_policy_cmd->add_option("--episodes", ep_episodes, "Episodes")->capture_default_str();
  eval_policy_cmd->add_option("--seed", ep_seed, "Master seed")->capture_default_str();

  // benchmark
  std::string bm_config, bm_out;
  auto* benchmark =
      app.add_subcommand("benchmark", "Data-budget sweep: self-model pipeline vs PPO");
  benchmark->add_option("--config", bm_config, "JSON run configuration")->required();
  benchmark->add_option("--out", bm_out, "Output directory (overrides config out_dir)");

  // transfer
  std::string tr_config, tr_out;
  long tr_budget = 0;
  std::uint64_t tr_seed = 0;
  auto* transfer = app.add_subcommand(
      "transfer", "One dataset, one self-model, two tasks (forward and jump)");
  transfer->add_option("--config", tr_config, "JSON run configuration")->required();
  transfer->add_option("--out", tr_out, "Output directory (overrides config out_dir)");
  transfer->add_option("--budget", tr_budget, "Real-transition budget (default: config)");
  transfer->add_option("--seed", tr_seed, "Master seed (default: config)");

  // report
  std::string rp_in, rp_out;
  auto* report = app.add_subcommand("report", "Re-emit report files from records.csv");
  report->add_option("--in", rp_in, "Directory containing records.csv")->required();
  report->add_option("--out", rp_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // usage problems: message plus usage text on stderr, exit 1
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (*collect) return cmd_collect(env, steps, episode_len, seed, out, csv);
    if (*train_model)
      return cmd_train_model(tm_dataset, tm_config, tm_seed, tm_out, tm_history);
    if (*eval_model) return cmd_eval_model(em_model, em_dataset, em_horizons);
    if (*train_policy)
      return cmd_train_policy(tp_model, tp_env, tp_dataset, tp_task, tp_config, tp_seed,
                              tp_steps, tp_out, tp_curve);
    if (*eval_policy_cmd)
      return cmd_eval_policy(ep_policy, ep_env, ep_task, ep_episodes, ep_seed);
    if (*benchmark) return cmd_benchmark(bm_config, bm_out);
    if (*transfer) return cmd_transfer(tr_config, tr_out, tr_budget, tr_seed);
    if (*report) return cmd_report(rp_in, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
