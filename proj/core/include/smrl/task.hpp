#pragma once

#include <string>

#include "smrl/env.hpp"

namespace smrl {

enum class TaskId { kForward, kJump, kPendulumUpright };

std::string task_name(TaskId id);
TaskId task_from_name(const std::string& name);

struct TaskSpec {
  TaskId id = TaskId::kForward;
  int horizon = 200;
  double z_term = 1.0;  // jump only: episode ends once z reaches this
};

// Throws if the task cannot be evaluated on this environment.
void validate_task(const TaskSpec& task, const EnvDescriptor& desc);
TaskSpec default_task(TaskId id);
EnvId task_env(TaskId id);

// Reward is the x velocity of the resulting state, so an episode's return
// is the distance traveled divided by dt.
double reward_forward(const EnvState& s, const EnvState& s_next);

struct JumpReward {
  double reward;
  bool done;
};
// Reward is the z velocity of the resulting state; the episode terminates
// once z reaches z_term.
JumpReward reward_jump(const EnvState& s, const EnvState& s_next, double z_term);

// -(th^2 + 0.1*thdot^2 + 0.001*tau^2), th from atan2 on the pre-step state,
// tau the native torque.
double reward_pendulum_upright(const EnvState& s, const EnvState& s_next,
                               const Action& a, const EnvDescriptor& desc);

struct StepOutcome {
  double reward;
  bool done;
};
// Dispatch on the task; `s` is the state the action was taken in and
// `s_next` the resulting (real or predicted) state.
StepOutcome task_step_outcome(const TaskSpec& task, const EnvDescriptor& desc,
                              const EnvState& s, const Action& a, const EnvState& s_next);

}  // namespace smrl
