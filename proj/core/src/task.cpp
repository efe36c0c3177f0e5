#include "smrl/task.hpp"

#include <cmath>
#include <stdexcept>

#include "smrl/tensor.hpp"

namespace smrl {

std::string task_name(TaskId id) {
  switch (id) {
    case TaskId::kForward:
      return "forward";
    case TaskId::kJump:
      return "jump";
    case TaskId::kPendulumUpright:
      return "pendulum";
  }
  throw std::invalid_argument("task_name: bad id");
}

TaskId task_from_name(const std::string& name) {
  if (name == "forward") return TaskId::kForward;
  if (name == "jump") return TaskId::kJump;
  if (name == "pendulum") return TaskId::kPendulumUpright;
  throw std::invalid_argument("unknown task: " + name);
}

EnvId task_env(TaskId id) {
  switch (id) {
    case TaskId::kForward:
    case TaskId::kJump:
      return EnvId::kPointHopper;
    case TaskId::kPendulumUpright:
      return EnvId::kPendulum;
  }
  throw std::invalid_argument("task_env: bad id");
}

TaskSpec default_task(TaskId id) {
  TaskSpec t;
  t.id = id;
  t.horizon = 200;
  t.z_term = 1.0;
  return t;
}

void validate_task(const TaskSpec& task, const EnvDescriptor& desc) {
  require(task.horizon >= 1, "task horizon must be >= 1");
  if (task.id == TaskId::kJump) require(task.z_term > 0.0, "jump z_term must be > 0");
  if (desc.id != task_env(task.id))
    throw std::invalid_argument("task '" + task_name(task.id) +
                                "' cannot run on environment '" + env_name(desc.id) + "'");
}

double reward_forward(const EnvState& s, const EnvState& s_next) {
  (void)s;
  return s_next[hopper::kXdot];
}

JumpReward reward_jump(const EnvState& s, const EnvState& s_next, double z_term) {
  (void)s;
  return {s_next[hopper::kZdot], s_next[hopper::kZ] >= z_term};
}

double reward_pendulum_upright(const EnvState& s, const EnvState& s_next, const Action& a,
                               const EnvDescriptor& desc) {
  (void)s_next;
  double th = std::atan2(s[1], s[0]);
  double thdot = s[2];
  double tau = denormalize_action(desc, a)[0];
  return -(th * th + 0.1 * thdot * thdot + 0.001 * tau * tau);
}

StepOutcome task_step_outcome(const TaskSpec& task, const EnvDescriptor& desc,
                              const EnvState& s, const Action& a, const EnvState& s_next) {
  switch (task.id) {
    case TaskId::kForward:
      return {reward_forward(s, s_next), false};
    case TaskId::kJump: {
      JumpReward r = reward_jump(s, s_next, task.z_term);
      return {r.reward, r.done};
    }
    case TaskId::kPendulumUpright:
      return {reward_pendulum_upright(s, s_next, a, desc), false};
  }
  throw std::invalid_argument("task_step_outcome: bad task");
}

}  // namespace smrl
