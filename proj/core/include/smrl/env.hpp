#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace smrl {

enum class EnvId { kPendulum, kCartpole, kPointHopper };

std::string env_name(EnvId id);
EnvId env_from_name(const std::string& name);

// State and action are plain vectors; semantic layout per environment is
// documented at each dynamics function.
using EnvState = std::vector<double>;
using Action = std::vector<double>;

struct EnvDescriptor {
  EnvId id;
  int state_dim;
  int action_dim;
  std::vector<double> native_action_low;
  std::vector<double> native_action_high;
  double dt;
};

EnvDescriptor make_descriptor(EnvId id);

// Deterministic function of (descriptor, seed).
EnvState env_reset(const EnvDescriptor& desc, std::uint64_t seed);

// Pure transition function; `a` is normalized to [-1, 1] per dimension.
EnvState env_step(const EnvDescriptor& desc, const EnvState& s, const Action& a);

// Affine maps between native action ranges and the normalized cube.
// Out-of-range inputs are clipped; when `clip_count` is given it is
// incremented once per clipped component.
Action normalize_action(const EnvDescriptor& desc, const std::vector<double>& native,
                        long* clip_count = nullptr);
std::vector<double> denormalize_action(const EnvDescriptor& desc, const Action& a,
                                       long* clip_count = nullptr);

// Pendulum state layout: (cos th, sin th, thdot), th = 0 upright.
// Cartpole state layout: (x, xdot, cos th, sin th, thdot), th = 0 upright.
// Point-hopper state layout: (z, xdot, zdot, contact).
namespace hopper {
constexpr int kZ = 0;
constexpr int kXdot = 1;
constexpr int kZdot = 2;
constexpr int kContact = 3;
}  // namespace hopper

}  // namespace smrl
