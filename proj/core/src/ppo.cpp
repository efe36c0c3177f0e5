#include "smrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "smrl/optim.hpp"
#include "smrl/tensor.hpp"

namespace smrl {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void gae(const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<int>& dones, double gamma, double lam,
         std::vector<double>& advantages, std::vector<double>& returns) {
  std::size_t T = rewards.size();
  require(values.size() == T + 1, "gae: values must have T+1 entries (bootstrap last)");
  require(dones.size() == T, "gae: dones length mismatch");
  advantages.assign(T, 0.0);
  returns.assign(T, 0.0);
  double running = 0.0;
  for (std::size_t i = T; i-- > 0;) {
    double nonterminal = dones[i] ? 0.0 : 1.0;
    double delta = rewards[i] + gamma * values[i + 1] * nonterminal - values[i];
    running = delta + gamma * lam * nonterminal * running;
    advantages[i] = running;
    returns[i] = running + values[i];
  }
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(advantages.size());
  double sd = std::sqrt(var);
  if (sd < 1e-12) {
    for (double& a : advantages) a -= mean;
    return;
  }
  for (double& a : advantages) a = (a - mean) / sd;
}

namespace {

// pi.* forward for a minibatch: returns the mean-head node [act x M]
int policy_mean_graph(Tape& t, int obs) {
  int h1 = t.tanh_(t.add_bias(t.matmul(t.param("pi.l1.W"), obs), t.param("pi.l1.b")));
  int h2 = t.tanh_(t.add_bias(t.matmul(t.param("pi.l2.W"), h1), t.param("pi.l2.b")));
  return t.add_bias(t.matmul(t.param("pi.mean.W"), h2), t.param("pi.mean.b"));
}

int value_graph(Tape& t, int obs) {
  int h1 = t.tanh_(t.add_bias(t.matmul(t.param("v.l1.W"), obs), t.param("v.l1.b")));
  int h2 = t.tanh_(t.add_bias(t.matmul(t.param("v.l2.W"), h1), t.param("v.l2.b")));
  return t.add_bias(t.matmul(t.param("v.out.W"), h2), t.param("v.out.b"));
}

Tensor stack_columns(const std::vector<EnvState>& rows, const std::vector<std::size_t>& idx) {
  std::size_t dim = rows[idx[0]].size();
  Tensor t = Tensor::zeros({dim, idx.size()});
  for (std::size_t j = 0; j < idx.size(); ++j)
    for (std::size_t r = 0; r < dim; ++r) t(r, j) = rows[idx[j]][r];
  return t;
}

}  // namespace

SurrogateBatch make_surrogate_batch(const RolloutBuffer& buffer,
                                    const std::vector<std::size_t>& idx, int act_dim) {
  std::size_t m = idx.size();
  std::size_t ad = static_cast<std::size_t>(act_dim);
  SurrogateBatch b;
  b.obs = stack_columns(buffer.obs, idx);
  b.pre_squash = Tensor::zeros({ad, m});
  b.tanh_corr = Tensor::zeros({1, m});
  b.logp_old = Tensor::zeros({1, m});
  b.advantages = Tensor::zeros({1, m});
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t r = 0; r < ad; ++r) {
      double u = buffer.pre_squash[idx[j]][r];
      b.pre_squash(r, j) = u;
      double th = std::tanh(u);
      b.tanh_corr(0, j) += std::log(1.0 - th * th + kSquashEps);
    }
    b.logp_old(0, j) = buffer.logp[idx[j]];
    b.advantages(0, j) = buffer.advantages[idx[j]];
  }
  return b;
}

SurrogateNodes build_surrogate_graph(Tape& t, const SurrogateBatch& batch, int act_dim,
                                     const PPOConfig& cfg) {
  int obs = t.constant(batch.obs);
  int mean = policy_mean_graph(t, obs);
  int ls = t.clamp(t.param("pi.log_std"), kLogStdMin, kLogStdMax);
  int inv_sigma = t.exp_(t.affine(ls, -1.0, 0.0));
  int z = t.mul_rowvec(t.sub(t.constant(batch.pre_squash), mean), inv_sigma);
  int gauss = t.affine(t.sum_rows(t.mul(z, z)), -0.5, 0.0);
  int sum_ls = t.sum_rows(ls);  // [1 x 1]
  int logp = t.add_scalar(gauss, t.affine(sum_ls, -1.0, 0.0));
  logp = t.sub(logp, t.constant(batch.tanh_corr));
  logp = t.affine(logp, 1.0, -0.5 * kLog2Pi * static_cast<double>(act_dim));

  SurrogateNodes out;
  out.ratio = t.exp_(t.sub(logp, t.constant(batch.logp_old)));
  int adv = t.constant(batch.advantages);
  int surr1 = t.mul(out.ratio, adv);
  int surr2 = t.mul(t.clamp(out.ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv);
  int surrogate = t.mean_all(t.min_(surr1, surr2));
  out.loss = t.affine(surrogate, -1.0, 0.0);
  if (cfg.entropy_coef != 0.0) {
    int ent =
        t.affine(sum_ls, 1.0, 0.5 * (1.0 + kLog2Pi) * static_cast<double>(act_dim));
    out.loss = t.sub(out.loss, t.affine(ent, cfg.entropy_coef, 0.0));
  }
  return out;
}

UpdateDiagnostics ppo_update(Policy& policy, ValueFn& value, AdamState& policy_adam,
                             AdamState& value_adam, const RolloutBuffer& buffer,
                             const PPOConfig& cfg, Rng& rng) {
  std::size_t T = buffer.size();
  require(T >= 1, "ppo_update: empty buffer");
  require(buffer.advantages.size() == T && buffer.returns.size() == T,
          "ppo_update: advantages/returns not computed");

  AdamConfig pi_cfg{cfg.policy_lr, 0.9, 0.999, 1e-8};
  AdamConfig v_cfg{cfg.value_lr, 0.9, 0.999, 1e-8};

  UpdateDiagnostics diag;
  diag.entropy = policy_entropy(policy);

  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);

  double sum_pl = 0.0, sum_vl = 0.0, sum_clip = 0.0, sum_kl = 0.0;
  bool stop = false;

  for (int epoch = 0; epoch < cfg.update_epochs && !stop; ++epoch) {
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < T && !stop;
         pos += static_cast<std::size_t>(cfg.minibatch_size)) {
      std::size_t m = std::min(static_cast<std::size_t>(cfg.minibatch_size), T - pos);
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(pos),
                                   order.begin() + static_cast<long>(pos + m));

      SurrogateBatch sb = make_surrogate_batch(buffer, idx, policy.act_dim);
      Tensor ret = Tensor::zeros({1, m});
      for (std::size_t j = 0; j < m; ++j) ret(0, j) = buffer.returns[idx[j]];

      // policy surrogate
      {
        Tape t(&policy.params);
        SurrogateNodes nodes = build_surrogate_graph(t, sb, policy.act_dim, cfg);
        int loss = nodes.loss;
        double loss_v = t.scalar(loss);
        if (!std::isfinite(loss_v))
          throw std::runtime_error("ppo_update: non-finite policy loss");

        // diagnostics from the ratio values
        const Tensor& rv = t.value(nodes.ratio);
        double clipped = 0.0, kl = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double r = rv[j];
          if (std::abs(r - 1.0) > cfg.clip_eps) clipped += 1.0;
          kl += (r - 1.0) - std::log(r);
        }
        clipped /= static_cast<double>(m);
        kl /= static_cast<double>(m);
        sum_pl += loss_v;
        sum_clip += clipped;
        sum_kl += kl;
        diag.minibatches += 1;

        policy.params.zero_grads();
        t.backward(loss);
        policy.params.clip_grad_norm(cfg.max_grad_norm);
        adam_step(policy.params, policy_adam, pi_cfg);

        if (kl > cfg.kl_threshold) {
          stop = true;
          diag.kl_stopped = true;
        }
      }

      // critic regression
      {
        Tape t(&value.params);
        int v_pred = value_graph(t, t.constant(sb.obs));
        int d = t.sub(v_pred, t.constant(ret));
        int vloss = t.mean_all(t.mul(d, d));
        double vl = t.scalar(vloss);
        if (!std::isfinite(vl)) throw std::runtime_error("ppo_update: non-finite value loss");
        sum_vl += vl;
        value.params.zero_grads();
        t.backward(vloss);
        value.params.clip_grad_norm(cfg.max_grad_norm);
        adam_step(value.params, value_adam, v_cfg);
      }
    }
  }

  if (diag.minibatches > 0) {
    diag.policy_loss = sum_pl / diag.minibatches;
    diag.value_loss = sum_vl / diag.minibatches;
    diag.clip_fraction = sum_clip / diag.minibatches;
    diag.approx_kl = sum_kl / diag.minibatches;
  }
  return diag;
}

EvalResult eval_policy(EnvLike& env, const Policy& policy, int episodes, std::uint64_t seed) {
  require(episodes >= 1, "eval_policy: need at least one episode");
  Rng rng(derive_seed(seed, "eval"));
  const EnvDescriptor& desc = env.descriptor();
  bool is_hopper = desc.id == EnvId::kPointHopper;

  std::vector<double> rets;
  double max_z_sum = 0.0, disp_sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EnvState s = env.reset(rng.next_u64());
    double ret = 0.0, max_z = is_hopper ? s[hopper::kZ] : 0.0, disp = 0.0;
    bool done = false;
    while (!done) {
      Action a = policy_mean(policy, s);
      EnvLike::Step st = env.step(a);
      ret += st.reward;
      if (is_hopper) {
        max_z = std::max(max_z, st.state[hopper::kZ]);
        disp += desc.dt * st.state[hopper::kXdot];
      }
      s = st.state;
      done = st.done;
    }
    rets.push_back(ret);
    max_z_sum += max_z;
    disp_sum += disp;
  }

  EvalResult r;
  r.episodes = episodes;
  double mean = 0.0;
  for (double x : rets) mean += x;
  mean /= static_cast<double>(rets.size());
  double var = 0.0;
  for (double x : rets) var += (x - mean) * (x - mean);
  var /= static_cast<double>(rets.size());
  r.ret_mean = mean;
  r.ret_std = std::sqrt(var);
  if (is_hopper) {
    r.max_z_mean = max_z_sum / episodes;
    r.x_disp_mean = disp_sum / episodes;
  }
  return r;
}

PpoResult ppo_train(EnvLike& env, EnvLike* eval_env, const PPOConfig& cfg,
                    std::uint64_t seed) {
  const EnvDescriptor& desc = env.descriptor();
  PpoResult result;
  result.policy = make_policy(desc.state_dim, desc.action_dim, derive_seed(seed, "ppo/pi"));
  result.value = make_value(desc.state_dim, derive_seed(seed, "ppo/v"));

  Rng sample_rng(derive_seed(seed, "ppo/sample"));
  Rng reset_rng(derive_seed(seed, "ppo/reset"));
  Rng mb_rng(derive_seed(seed, "ppo/minibatch"));
  Rng eval_rng(derive_seed(seed, "ppo/eval"));

  AdamState pi_adam, v_adam;
  long done_steps = 0;
  long next_eval = 0;
  EnvState state;
  bool need_reset = true;

  auto evaluate = [&]() {
    if (!eval_env) return;
    EvalResult ev = eval_policy(*eval_env, result.policy, cfg.eval_episodes,
                                eval_rng.next_u64());
    result.curve.push_back(
        {done_steps, ev.ret_mean, ev.ret_std, ev.max_z_mean, ev.x_disp_mean});
  };

  if (eval_env && cfg.total_steps > 0) {
    evaluate();  // untrained point at zero steps
    next_eval = cfg.eval_interval;
  }

  while (done_steps < cfg.total_steps) {
    long batch_T =
        std::min<long>(cfg.steps_per_batch, cfg.total_steps - done_steps);
    RolloutBuffer buf;
    buf.obs.reserve(static_cast<std::size_t>(batch_T));

    for (long t = 0; t < batch_T; ++t) {
      if (need_reset) {
        state = env.reset(reset_rng.next_u64());
        need_reset = false;
      }
      ActSample act = policy_act(result.policy, state, sample_rng);
      double v = value_eval(result.value, state);
      EnvLike::Step st = env.step(act.a);
      buf.obs.push_back(state);
      buf.pre_squash.push_back(act.u);
      buf.logp.push_back(act.logp);
      buf.rewards.push_back(st.reward);
      buf.values.push_back(v);
      buf.dones.push_back(st.done ? 1 : 0);
      state = st.state;
      if (st.done) need_reset = true;
    }
    // bootstrap with the value of the state the batch stopped in
    double bootstrap = need_reset ? 0.0 : value_eval(result.value, state);
    buf.values.push_back(bootstrap);

    gae(buf.rewards, buf.values, buf.dones, cfg.gamma, cfg.lam, buf.advantages,
        buf.returns);
    normalize_advantages(buf.advantages);
    result.last_update =
        ppo_update(result.policy, result.value, pi_adam, v_adam, buf, cfg, mb_rng);

    done_steps += batch_T;
    if (eval_env && done_steps >= next_eval && done_steps < cfg.total_steps) {
      evaluate();
      next_eval += cfg.eval_interval;
    }
  }
  if (eval_env && cfg.total_steps > 0) evaluate();  // final point
  result.env_steps = done_steps;
  return result;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_curve_csv: cannot open " + path);
  os << "cumulative_env_steps,eval_return_mean,eval_return_std,aux_max_z,aux_x_disp\n";
  os.precision(17);
  for (const CurvePoint& p : curve)
    os << p.env_steps << "," << p.eval_return_mean << "," << p.eval_return_std << ","
       << p.aux_max_z << "," << p.aux_x_disp << "\n";
}

}  // namespace smrl
