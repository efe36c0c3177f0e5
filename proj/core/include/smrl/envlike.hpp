#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "smrl/dataset.hpp"
#include "smrl/env.hpp"
#include "smrl/selfmodel.hpp"
#include "smrl/task.hpp"

namespace smrl {

// What a policy trainer needs from an environment. Satisfied by the real
// dynamics and by a trained self-model alike, which is the substitution
// that lets every policy train on predicted states only.
class EnvLike {
 public:
  virtual ~EnvLike() = default;

  struct Step {
    EnvState state;
    double reward;
    bool done;
  };

  virtual EnvState reset(std::uint64_t seed) = 0;
  // Calling step() after done without an intervening reset throws.
  virtual Step step(const Action& a) = 0;
  virtual const EnvDescriptor& descriptor() const = 0;
};

// Real dynamics with task rewards, horizon termination and instrumented
// step/reset counters for data-budget accounting.
class RealEnv : public EnvLike {
 public:
  RealEnv(const EnvDescriptor& desc, const TaskSpec& task, StepCounter* counter = nullptr);

  EnvState reset(std::uint64_t seed) override;
  Step step(const Action& a) override;
  const EnvDescriptor& descriptor() const override { return desc_; }

  long steps_taken() const { return local_.steps; }

 private:
  EnvDescriptor desc_;
  TaskSpec task_;
  StepCounter* counter_;
  StepCounter local_;
  EnvState state_;
  int t_ = 0;
  bool needs_reset_ = true;
};

// Episodes dreamed by the self-model: reset grounds the model on a recorded
// seed state, step advances through the predictor, rewards come from the
// task applied to predicted states. Touches no real dynamics.
class ModelEnv : public EnvLike {
 public:
  ModelEnv(const SelfModel& model, const TaskSpec& task, std::vector<EnvState> seed_states,
           int horizon);

  EnvState reset(std::uint64_t seed) override;
  Step step(const Action& a) override;
  const EnvDescriptor& descriptor() const override { return desc_; }

  long predict_calls() const { return predict_calls_; }

 private:
  const SelfModel* model_;
  TaskSpec task_;
  std::vector<EnvState> seeds_;
  int horizon_;
  EnvDescriptor desc_;
  HiddenState h_;
  EnvState state_;
  int t_ = 0;
  bool needs_reset_ = true;
  long predict_calls_ = 0;
};

// Episode-initial states, the reset pool for ModelEnv.
std::vector<EnvState> episode_initial_states(const Dataset& ds);

}  // namespace smrl
