#include "smrl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smrl/tensor.hpp"

namespace smrl {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + context);
}

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_selfmodel(const json& obj, SelfModelConfig& cfg) {
  check_keys(obj,
             {"hidden_size", "decoder_hidden", "n", "learning_rate", "batch_size",
              "max_epochs", "patience", "w_recon", "w_single", "w_seq", "window_stride",
              "grad_clip"},
             "selfmodel");
  read_if(obj, "hidden_size", cfg.hidden_size);
  read_if(obj, "decoder_hidden", cfg.decoder_hidden);
  read_if(obj, "n", cfg.n);
  read_if(obj, "learning_rate", cfg.learning_rate);
  read_if(obj, "batch_size", cfg.batch_size);
  read_if(obj, "max_epochs", cfg.max_epochs);
  read_if(obj, "patience", cfg.patience);
  read_if(obj, "w_recon", cfg.w_recon);
  read_if(obj, "w_single", cfg.w_single);
  read_if(obj, "w_seq", cfg.w_seq);
  read_if(obj, "window_stride", cfg.window_stride);
  read_if(obj, "grad_clip", cfg.grad_clip);
}

void read_ppo(const json& obj, PPOConfig& cfg) {
  check_keys(obj,
             {"gamma", "lam", "clip_eps", "update_epochs", "minibatch_size",
              "steps_per_batch", "policy_lr", "value_lr", "entropy_coef", "total_steps",
              "horizon", "kl_threshold", "max_grad_norm", "eval_episodes", "eval_interval"},
             "ppo");
  read_if(obj, "gamma", cfg.gamma);
  read_if(obj, "lam", cfg.lam);
  read_if(obj, "clip_eps", cfg.clip_eps);
  read_if(obj, "update_epochs", cfg.update_epochs);
  read_if(obj, "minibatch_size", cfg.minibatch_size);
  read_if(obj, "steps_per_batch", cfg.steps_per_batch);
  read_if(obj, "policy_lr", cfg.policy_lr);
  read_if(obj, "value_lr", cfg.value_lr);
  read_if(obj, "entropy_coef", cfg.entropy_coef);
  read_if(obj, "total_steps", cfg.total_steps);
  read_if(obj, "horizon", cfg.horizon);
  read_if(obj, "kl_threshold", cfg.kl_threshold);
  read_if(obj, "max_grad_norm", cfg.max_grad_norm);
  read_if(obj, "eval_episodes", cfg.eval_episodes);
  read_if(obj, "eval_interval", cfg.eval_interval);
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(obj,
             {"env", "task", "budgets", "baseline_budgets", "seeds", "episode_len",
              "val_fraction", "eval_episodes", "model_ppo_steps", "target_returns",
              "selfmodel", "ppo", "out_dir"},
             "top level");

  ExperimentConfig cfg;
  if (obj.contains("env")) cfg.env = env_from_name(obj.at("env").get<std::string>());
  if (obj.contains("task")) cfg.task = task_from_name(obj.at("task").get<std::string>());
  read_if(obj, "budgets", cfg.budgets);
  read_if(obj, "baseline_budgets", cfg.baseline_budgets);
  read_if(obj, "seeds", cfg.seeds);
  read_if(obj, "episode_len", cfg.episode_len);
  read_if(obj, "val_fraction", cfg.val_fraction);
  read_if(obj, "eval_episodes", cfg.eval_episodes);
  read_if(obj, "model_ppo_steps", cfg.model_ppo_steps);
  read_if(obj, "target_returns", cfg.target_returns);
  read_if(obj, "out_dir", cfg.out_dir);
  if (obj.contains("selfmodel")) read_selfmodel(obj.at("selfmodel"), cfg.model);
  if (obj.contains("ppo")) read_ppo(obj.at("ppo"), cfg.ppo);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json obj;
  obj["env"] = env_name(cfg.env);
  obj["task"] = task_name(cfg.task);
  obj["budgets"] = cfg.budgets;
  obj["baseline_budgets"] = cfg.baseline_budgets;
  obj["seeds"] = cfg.seeds;
  obj["episode_len"] = cfg.episode_len;
  obj["val_fraction"] = cfg.val_fraction;
  obj["eval_episodes"] = cfg.eval_episodes;
  obj["model_ppo_steps"] = cfg.model_ppo_steps;
  obj["target_returns"] = cfg.target_returns;
  obj["out_dir"] = cfg.out_dir;
  json sm;
  sm["hidden_size"] = cfg.model.hidden_size;
  sm["decoder_hidden"] = cfg.model.decoder_hidden;
  sm["n"] = cfg.model.n;
  sm["learning_rate"] = cfg.model.learning_rate;
  sm["batch_size"] = cfg.model.batch_size;
  sm["max_epochs"] = cfg.model.max_epochs;
  sm["patience"] = cfg.model.patience;
  sm["w_recon"] = cfg.model.w_recon;
  sm["w_single"] = cfg.model.w_single;
  sm["w_seq"] = cfg.model.w_seq;
  sm["window_stride"] = cfg.model.window_stride;
  sm["grad_clip"] = cfg.model.grad_clip;
  obj["selfmodel"] = sm;
  json ppo;
  ppo["gamma"] = cfg.ppo.gamma;
  ppo["lam"] = cfg.ppo.lam;
  ppo["clip_eps"] = cfg.ppo.clip_eps;
  ppo["update_epochs"] = cfg.ppo.update_epochs;
  ppo["minibatch_size"] = cfg.ppo.minibatch_size;
  ppo["steps_per_batch"] = cfg.ppo.steps_per_batch;
  ppo["policy_lr"] = cfg.ppo.policy_lr;
  ppo["value_lr"] = cfg.ppo.value_lr;
  ppo["entropy_coef"] = cfg.ppo.entropy_coef;
  ppo["total_steps"] = cfg.ppo.total_steps;
  ppo["horizon"] = cfg.ppo.horizon;
  ppo["kl_threshold"] = cfg.ppo.kl_threshold;
  ppo["max_grad_norm"] = cfg.ppo.max_grad_norm;
  ppo["eval_episodes"] = cfg.ppo.eval_episodes;
  ppo["eval_interval"] = cfg.ppo.eval_interval;
  obj["ppo"] = ppo;
  return obj.dump(2) + "\n";
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write resolved config: " + path);
  os << config_to_json_text(cfg);
}

}  // namespace smrl
