#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smrl/dataset.hpp"
#include "smrl/params.hpp"
#include "smrl/tape.hpp"

namespace smrl {

struct SelfModelConfig {
  int hidden_size = 128;
  int decoder_hidden = 128;
  int n = 100;  // training-window length
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;  // early stop on validation one-step MSE
  double w_recon = 1.0;
  double w_single = 1.0;
  double w_seq = 1.0;
  int window_stride = 10;
  double grad_clip = 5.0;
};

// Two GRUs with a shared decoder. The corrector ingests a (normalized)
// ground-truth state to ground the hidden state; the predictor advances
// the hidden state from an action alone; the decoder maps either hidden
// state back to state space. Open-loop prediction is the corrector once,
// then the predictor iterated indefinitely.
struct SelfModel {
  int state_dim = 0;
  int action_dim = 0;
  SelfModelConfig config;
  ParamStore params;  // corrector.*, predictor.*, decoder.*
  NormStats norm;
};

SelfModel make_self_model(int state_dim, int action_dim, const SelfModelConfig& cfg,
                          const NormStats& norm, std::uint64_t init_seed);

struct HiddenState {
  Tensor h;              // [hidden x 1]
  long step = 0;         // updates applied so far (corrector or predictor)
  long grounded_at = 0;  // step index of the last corrector update
};

struct LossBreakdown {
  double l_recon = 0.0;
  double l_single = 0.0;
  double l_seq = 0.0;
  double total = 0.0;
};

struct CorrectResult {
  HiddenState h;
  EnvState s_recon;
};
// Grounding step. Pass prev = nullptr for the null hidden state. Raw
// states in, raw reconstruction out; normalization is internal.
CorrectResult correct(const SelfModel& m, const HiddenState* prev, const EnvState& s);

struct PredictResult {
  HiddenState h;
  EnvState s_hat;
};
PredictResult predict(const SelfModel& m, const HiddenState& h, const Action& a);

// Iterated prediction from a single seed observation; consumes no ground
// truth beyond s0. Bit-equal to correct() followed by predict() calls.
std::vector<EnvState> rollout_open_loop(const SelfModel& m, const EnvState& s0,
                                        const std::vector<Action>& actions);

// Mid-rollout corrector update on a new observation.
HiddenState reground(const SelfModel& m, const HiddenState& h, const EnvState& s_observed);

struct Window {
  EnvState s0;
  std::vector<Action> actions;      // a_{t+1..t+n}
  std::vector<EnvState> targets;    // s_{t+1..t+n}
};
Window materialize_window(const Dataset& ds, const WindowRef& ref, std::size_t n);

// The three losses over one window, in normalized state space:
//   l_recon  = mean((s0_recon - s0)^2)          from the corrector
//   l_single = mean((s1_hat - s1)^2)            first predictor step
//   l_seq    = (1/n) sum_i mean((si_hat - si)^2) over the open-loop chain
//   total    = w_recon*l_recon + w_single*l_single + w_seq*l_seq
LossBreakdown compute_losses(const SelfModel& m, const Window& window);

// Training internals, exposed for gradient checking and benchmarks.
// Windows stacked into [dim x batch] matrices, states pre-normalized.
struct WindowBatch {
  Tensor s0n;
  std::vector<Tensor> actions;
  std::vector<Tensor> targets_n;
  std::size_t batch = 0;
  std::size_t n = 0;
};
WindowBatch make_window_batch(const SelfModel& m, const std::vector<Window>& ws);

struct LossNodes {
  int l_recon = -1;
  int l_single = -1;
  int l_seq = -1;
  int total = -1;
};
// Builds the full corrector -> predictor-chain -> shared-decoder loss graph
// on a tape bound to m.params.
LossNodes build_loss_graph(Tape& t, const SelfModel& m, const WindowBatch& b);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;  // epoch mean
  double val_l_single = 0.0;
  double val_mse_h1 = 0.0;
  double val_mse_h10 = 0.0;
  double val_mse_h100 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  std::size_t window_stride = 0;
};

// Minimizes the weighted loss with Adam over mini-batches of windows;
// deterministic in seed; the returned model is the best-validation
// checkpoint (validation one-step MSE).
TrainHistory train_self_model(SelfModel& m, const Dataset& train_ds, const Dataset& val_ds,
                              std::uint64_t seed);

struct HorizonMse {
  std::map<int, double> mse;         // horizon -> mean normalized-space MSE
  std::vector<int> skipped;          // horizons no validation window covers
  std::size_t windows_evaluated = 0;
};
HorizonMse evaluate_horizons(const SelfModel& m, const Dataset& val_ds,
                             const std::vector<int>& horizons);

// Persistence reference: predict s_{t+k} = s_t; same windows and the same
// normalized-space MSE as evaluate_horizons.
HorizonMse persistence_horizons(const SelfModel& m, const Dataset& val_ds,
                                const std::vector<int>& horizons);

// SMM1 container: magic | u32 LE JSON header length | JSON header (dims,
// config, normalization stats, parameter names in order) | flat
// little-endian 64-bit parameter arrays in sorted name order.
void save_model(const SelfModel& m, const std::string& path);
SelfModel load_model(const std::string& path);

void write_history_csv(const TrainHistory& h, const std::string& path);

}  // namespace smrl
