#include "smrl/envlike.hpp"

#include <stdexcept>

#include "smrl/rng.hpp"
#include "smrl/tensor.hpp"

namespace smrl {

RealEnv::RealEnv(const EnvDescriptor& desc, const TaskSpec& task, StepCounter* counter)
    : desc_(desc), task_(task), counter_(counter) {
  validate_task(task, desc);
}

EnvState RealEnv::reset(std::uint64_t seed) {
  state_ = env_reset(desc_, seed);
  t_ = 0;
  needs_reset_ = false;
  local_.resets += 1;
  if (counter_) counter_->resets += 1;
  return state_;
}

EnvLike::Step RealEnv::step(const Action& a) {
  if (needs_reset_) throw std::logic_error("RealEnv: step() after done without reset()");
  EnvState next = env_step(desc_, state_, a);
  local_.steps += 1;
  if (counter_) counter_->steps += 1;
  StepOutcome out = task_step_outcome(task_, desc_, state_, a, next);
  state_ = next;
  t_ += 1;
  bool done = out.done || t_ >= task_.horizon;
  needs_reset_ = done;
  return {state_, out.reward, done};
}

ModelEnv::ModelEnv(const SelfModel& model, const TaskSpec& task,
                   std::vector<EnvState> seed_states, int horizon)
    : model_(&model), task_(task), seeds_(std::move(seed_states)), horizon_(horizon) {
  require(!seeds_.empty(), "ModelEnv: empty seed-state pool");
  require(horizon_ >= 1, "ModelEnv: horizon must be >= 1");
  desc_ = make_descriptor(task_env(task.id));
  validate_task(task, desc_);
  require(desc_.state_dim == model.state_dim && desc_.action_dim == model.action_dim,
          "ModelEnv: model dims do not match the task environment");
}

EnvState ModelEnv::reset(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "model_env/reset"));
  state_ = seeds_[rng.index(seeds_.size())];
  h_ = correct(*model_, nullptr, state_).h;
  t_ = 0;
  needs_reset_ = false;
  return state_;
}

EnvLike::Step ModelEnv::step(const Action& a) {
  if (needs_reset_) throw std::logic_error("ModelEnv: step() after done without reset()");
  PredictResult p = predict(*model_, h_, a);
  predict_calls_ += 1;
  StepOutcome out = task_step_outcome(task_, desc_, state_, a, p.s_hat);
  h_ = std::move(p.h);
  state_ = p.s_hat;
  t_ += 1;
  bool done = out.done || t_ >= horizon_;
  needs_reset_ = done;
  return {state_, out.reward, done};
}

std::vector<EnvState> episode_initial_states(const Dataset& ds) {
  std::vector<EnvState> seeds;
  for (const auto& ep : ds.episodes)
    if (!ep.empty()) seeds.push_back(ep.front().s);
  return seeds;
}

}  // namespace smrl
