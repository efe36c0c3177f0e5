#include "smrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "smrl/rng.hpp"
#include "smrl/tensor.hpp"

namespace smrl {

namespace {

constexpr double kPi = std::numbers::pi;

double clip(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

// pendulum constants: g=10, m=1, l=1, torque in [-2, 2], dt=0.05
constexpr double kPendG = 10.0;
constexpr double kPendMaxSpeed = 8.0;

// cartpole constants: cart mass 1, pole mass 0.1, pole half-length 0.5,
// g=9.8, force in [-10, 10], dt=0.02, track [-3, 3] with hard walls
constexpr double kCartG = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kPoleHalfLen = 0.5;
constexpr double kTrackLimit = 3.0;
constexpr double kCartMaxSpin = 15.0;

// point hopper: a thrust-capable point mass over flat ground.
//   grounded: leg impulse zdot += max(0, az); friction xdot *= 0.8;
//             gravity is cancelled by the normal force
//   airborne: gravity zdot -= dt*g; air control xdot += dt*ax/(1+2z)
//             (thrust loses authority with altitude)
//   landing:  z clamped to 0, downward zdot bounces to -0.5*zdot
// Walking and jumping are genuinely different: forward progress needs
// airtime (ground friction eats xdot and there is no ground x-thrust),
// while height needs grounded impulses timed with the contact flag.
constexpr double kHopG = 10.0;
constexpr double kHopFriction = 0.8;
constexpr double kHopRestitution = 0.5;
constexpr double kHopMaxSpeed = 10.0;

EnvState pendulum_step(const EnvDescriptor& desc, const EnvState& s, double torque) {
  double th = std::atan2(s[1], s[0]);
  double thdot = s[2];
  // thdd = (3g/2l) sin th + (3/ml^2) tau, explicit Euler
  double thdd = 1.5 * kPendG * std::sin(th) + 3.0 * torque;
  double th_next = th + desc.dt * thdot;
  double thdot_next = clip(thdot + desc.dt * thdd, -kPendMaxSpeed, kPendMaxSpeed);
  return {std::cos(th_next), std::sin(th_next), thdot_next};
}

EnvState cartpole_step(const EnvDescriptor& desc, const EnvState& s, double force) {
  double x = s[0], xdot = s[1];
  double th = std::atan2(s[3], s[2]);
  double thdot = s[4];
  double costh = s[2], sinth = s[3];
  double total_mass = kCartMass + kPoleMass;
  double pm_len = kPoleMass * kPoleHalfLen;
  double temp = (force + pm_len * thdot * thdot * sinth) / total_mass;
  double thdd = (kCartG * sinth - costh * temp) /
                (kPoleHalfLen * (4.0 / 3.0 - kPoleMass * costh * costh / total_mass));
  double xdd = temp - pm_len * thdd * costh / total_mass;

  double x_next = x + desc.dt * xdot;
  double xdot_next = xdot + desc.dt * xdd;
  double th_next = th + desc.dt * thdot;
  double thdot_next = clip(thdot + desc.dt * thdd, -kCartMaxSpin, kCartMaxSpin);
  if (x_next < -kTrackLimit) {
    x_next = -kTrackLimit;
    xdot_next = 0.0;
  } else if (x_next > kTrackLimit) {
    x_next = kTrackLimit;
    xdot_next = 0.0;
  }
  return {x_next, xdot_next, std::cos(th_next), std::sin(th_next), thdot_next};
}

EnvState hopper_step(const EnvDescriptor& desc, const EnvState& s, double ax, double az) {
  double z = s[hopper::kZ];
  double xdot = s[hopper::kXdot];
  double zdot = s[hopper::kZdot];
  bool contact = s[hopper::kContact] != 0.0;

  if (contact) {
    zdot += std::max(0.0, az);
    xdot *= kHopFriction;
  } else {
    zdot -= desc.dt * kHopG;
    xdot += desc.dt * ax / (1.0 + 2.0 * z);
  }
  xdot = clip(xdot, -kHopMaxSpeed, kHopMaxSpeed);
  zdot = clip(zdot, -kHopMaxSpeed, kHopMaxSpeed);

  z += desc.dt * zdot;
  double contact_next = 0.0;
  if (z <= 0.0) {
    z = 0.0;
    zdot = zdot < 0.0 ? -kHopRestitution * zdot : zdot;
    contact_next = 1.0;
  }
  return {z, xdot, zdot, contact_next};
}

}  // namespace

std::string env_name(EnvId id) {
  switch (id) {
    case EnvId::kPendulum:
      return "pendulum";
    case EnvId::kCartpole:
      return "cartpole";
    case EnvId::kPointHopper:
      return "point_hopper";
  }
  throw std::invalid_argument("env_name: bad id");
}

EnvId env_from_name(const std::string& name) {
  if (name == "pendulum") return EnvId::kPendulum;
  if (name == "cartpole") return EnvId::kCartpole;
  if (name == "point_hopper") return EnvId::kPointHopper;
  throw std::invalid_argument("unknown environment: " + name);
}

EnvDescriptor make_descriptor(EnvId id) {
  switch (id) {
    case EnvId::kPendulum:
      return {id, 3, 1, {-2.0}, {2.0}, 0.05};
    case EnvId::kCartpole:
      return {id, 5, 1, {-10.0}, {10.0}, 0.02};
    case EnvId::kPointHopper:
      return {id, 4, 2, {-5.0, -5.0}, {5.0, 5.0}, 0.05};
  }
  throw std::invalid_argument("make_descriptor: bad id");
}

EnvState env_reset(const EnvDescriptor& desc, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "env_reset/" + env_name(desc.id)));
  switch (desc.id) {
    case EnvId::kPendulum: {
      double th = rng.uniform(-kPi, kPi);
      double thdot = rng.uniform(-1.0, 1.0);
      return {std::cos(th), std::sin(th), thdot};
    }
    case EnvId::kCartpole: {
      // hanging down with small jitter; swing-up starts near th = pi
      double x = rng.uniform(-0.05, 0.05);
      double xdot = rng.uniform(-0.05, 0.05);
      double th = kPi + rng.uniform(-0.05, 0.05);
      double thdot = rng.uniform(-0.05, 0.05);
      return {x, xdot, std::cos(th), std::sin(th), thdot};
    }
    case EnvId::kPointHopper: {
      double xdot = rng.uniform(-0.05, 0.05);
      double zdot = rng.uniform(-0.05, 0.05);
      return {0.0, xdot, zdot, 1.0};
    }
  }
  throw std::invalid_argument("env_reset: bad id");
}

EnvState env_step(const EnvDescriptor& desc, const EnvState& s, const Action& a) {
  require(static_cast<int>(s.size()) == desc.state_dim, "env_step: state dim mismatch");
  require(static_cast<int>(a.size()) == desc.action_dim, "env_step: action dim mismatch");
  std::vector<double> native = denormalize_action(desc, a);

  EnvState next;
  switch (desc.id) {
    case EnvId::kPendulum:
      next = pendulum_step(desc, s, native[0]);
      break;
    case EnvId::kCartpole:
      next = cartpole_step(desc, s, native[0]);
      break;
    case EnvId::kPointHopper:
      next = hopper_step(desc, s, native[0], native[1]);
      break;
    default:
      throw std::invalid_argument("env_step: bad id");
  }
  for (double v : next)
    if (!std::isfinite(v)) throw std::runtime_error("env_step: non-finite state produced");
  return next;
}

Action normalize_action(const EnvDescriptor& desc, const std::vector<double>& native,
                        long* clip_count) {
  require(static_cast<int>(native.size()) == desc.action_dim,
          "normalize_action: dim mismatch");
  Action a(native.size());
  for (std::size_t i = 0; i < native.size(); ++i) {
    double lo = desc.native_action_low[i];
    double hi = desc.native_action_high[i];
    double x = native[i];
    if (x < lo || x > hi) {
      x = clip(x, lo, hi);
      if (clip_count) ++*clip_count;
    }
    a[i] = 2.0 * (x - lo) / (hi - lo) - 1.0;
  }
  return a;
}

std::vector<double> denormalize_action(const EnvDescriptor& desc, const Action& a,
                                       long* clip_count) {
  require(static_cast<int>(a.size()) == desc.action_dim, "denormalize_action: dim mismatch");
  std::vector<double> native(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = a[i];
    if (x < -1.0 || x > 1.0) {
      x = clip(x, -1.0, 1.0);
      if (clip_count) ++*clip_count;
    }
    double lo = desc.native_action_low[i];
    double hi = desc.native_action_high[i];
    native[i] = lo + (x + 1.0) * 0.5 * (hi - lo);
  }
  return native;
}

}  // namespace smrl
