#pragma once

#include <cstdint>
#include <vector>

#include "smrl/envlike.hpp"
#include "smrl/optim.hpp"
#include "smrl/policy.hpp"

namespace smrl {

struct PPOConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip_eps = 0.2;
  int update_epochs = 10;
  int minibatch_size = 64;
  int steps_per_batch = 2048;
  double policy_lr = 3e-4;
  double value_lr = 3e-4;
  double entropy_coef = 0.0;
  long total_steps = 100000;
  int horizon = 200;  // episode cutoff used when building environments
  double kl_threshold = 0.03;
  double max_grad_norm = 0.5;
  int eval_episodes = 20;
  long eval_interval = 20480;  // env steps between evaluation points
};

// Parallel arrays for one collection batch.
struct RolloutBuffer {
  std::vector<EnvState> obs;
  std::vector<std::vector<double>> pre_squash;  // gaussian samples before tanh
  std::vector<double> logp;
  std::vector<double> rewards;
  std::vector<double> values;  // length T+1, last entry is the bootstrap
  std::vector<int> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return rewards.size(); }
};

// delta_t = r_t + gamma*v_{t+1}*(1-done_t) - v_t
// A_t     = delta_t + gamma*lam*(1-done_t)*A_{t+1}
// returns = A + v. `values` carries T+1 entries, the last the bootstrap.
void gae(const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<int>& dones, double gamma, double lam,
         std::vector<double>& advantages, std::vector<double>& returns);

// In-place (A - mean) / std over the whole batch.
void normalize_advantages(std::vector<double>& advantages);

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
  bool kl_stopped = false;
};

// One minibatch of the clipped-surrogate objective in matrix form.
struct SurrogateBatch {
  Tensor obs;         // [obs x M]
  Tensor pre_squash;  // [act x M]
  Tensor tanh_corr;   // [1 x M] squash log-prob correction (constant in params)
  Tensor logp_old;    // [1 x M]
  Tensor advantages;  // [1 x M]
};
SurrogateBatch make_surrogate_batch(const RolloutBuffer& buffer,
                                    const std::vector<std::size_t>& idx, int act_dim);

struct SurrogateNodes {
  int loss;   // negated surrogate (minus any entropy bonus), to minimize
  int ratio;  // [1 x M] probability ratios, for diagnostics
};
// Builds -E[min(r A, clip(r) A)] - entropy_coef * H on a tape bound to the
// policy's parameter store.
SurrogateNodes build_surrogate_graph(Tape& t, const SurrogateBatch& batch, int act_dim,
                                     const PPOConfig& cfg);

// Clipped-surrogate ascent: maximizes E[min(r*A, clip(r, 1-e, 1+e)*A)] plus
// the entropy bonus; the critic minimizes MSE to the returns. Runs
// cfg.update_epochs passes of minibatch Adam, stopping early once the
// approximate KL passes cfg.kl_threshold. Advantages must already be
// normalized.
UpdateDiagnostics ppo_update(Policy& policy, ValueFn& value, AdamState& policy_adam,
                             AdamState& value_adam, const RolloutBuffer& buffer,
                             const PPOConfig& cfg, Rng& rng);

struct EvalResult {
  double ret_mean = 0.0;
  double ret_std = 0.0;
  double max_z_mean = 0.0;    // point_hopper only
  double x_disp_mean = 0.0;   // point_hopper only
  int episodes = 0;
};
EvalResult eval_policy(EnvLike& env, const Policy& policy, int episodes, std::uint64_t seed);

struct CurvePoint {
  long env_steps = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double aux_max_z = 0.0;
  double aux_x_disp = 0.0;
};

struct PpoResult {
  Policy policy;
  ValueFn value;
  std::vector<CurvePoint> curve;
  UpdateDiagnostics last_update;
  long env_steps = 0;
};

// Alternates collection on `env` (exactly cfg.total_steps steps, the last
// batch possibly short) with ppo_update. Deterministic in seed. When
// `eval_env` is given, periodic deterministic-action evaluations build the
// learning curve.
PpoResult ppo_train(EnvLike& env, EnvLike* eval_env, const PPOConfig& cfg,
                    std::uint64_t seed);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

}  // namespace smrl
