#pragma once

#include <cstdint>
#include <string>

#include "smrl/env.hpp"
#include "smrl/params.hpp"
#include "smrl/rng.hpp"
#include "smrl/tape.hpp"

namespace smrl {

// Gaussian policy: 2 hidden layers of 64 tanh units, a linear mean head
// scaled small at init, and a state-independent per-dimension log-std
// clamped to [-5, 2]. Samples are tanh-squashed into [-1, 1] with the
// log-prob correction.
struct Policy {
  int obs_dim = 0;
  int act_dim = 0;
  int hidden = 64;
  ParamStore params;  // pi.l1.{W,b}, pi.l2.{W,b}, pi.mean.{W,b}, pi.log_std
};

// Critic: 2 hidden layers of 64 tanh units, scalar output.
struct ValueFn {
  int obs_dim = 0;
  int hidden = 64;
  ParamStore params;  // v.l1.{W,b}, v.l2.{W,b}, v.out.{W,b}
};

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kSquashEps = 1e-6;

Policy make_policy(int obs_dim, int act_dim, std::uint64_t seed);
ValueFn make_value(int obs_dim, std::uint64_t seed);

struct ActSample {
  Action a;                    // squashed, in [-1, 1]
  std::vector<double> u;       // pre-squash gaussian sample
  double logp;
};
ActSample policy_act(const Policy& p, const EnvState& s, Rng& rng);

// Deterministic evaluation action tanh(mean(s)).
Action policy_mean(const Policy& p, const EnvState& s);

// log pi(u|s) for a stored pre-squash sample, including the tanh correction.
double policy_logp(const Policy& p, const EnvState& s, const std::vector<double>& u);

double value_eval(const ValueFn& v, const EnvState& s);

// diagnostic entropy of the underlying gaussian: sum(log_std) + k/2 log(2 pi e)
double policy_entropy(const Policy& p);

// SMP1 container: magic | u32 LE JSON header length | JSON header | flat
// little-endian 64-bit parameter arrays (policy then value, each in sorted
// name order).
void save_policy(const Policy& p, const ValueFn& v, const std::string& path);
struct PolicyCheckpoint {
  Policy policy;
  ValueFn value;
};
PolicyCheckpoint load_policy(const std::string& path);

}  // namespace smrl
