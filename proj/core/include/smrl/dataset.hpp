#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smrl/env.hpp"

namespace smrl {

struct Transition {
  EnvState s;
  Action a;
  EnvState s_next;
};

// Contiguous run of transitions between two resets: s_next of step i is
// bit-equal to s of step i+1.
using Episode = std::vector<Transition>;

// Per-dimension z-score statistics over states. Actions are already in
// [-1, 1] by construction and pass through unscaled.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-6

  std::vector<double> apply(const std::vector<double>& s) const;
  std::vector<double> invert(const std::vector<double>& z) const;
};

struct Dataset {
  EnvDescriptor descriptor;
  std::vector<Episode> episodes;
  std::optional<NormStats> norm;
  std::uint64_t seed = 0;

  std::size_t total_transitions() const {
    std::size_t n = 0;
    for (const auto& ep : episodes) n += ep.size();
    return n;
  }
};

// Counts real-environment usage; threaded through collection and the
// real-environment adapters so budget accounting comes from one place.
struct StepCounter {
  long steps = 0;
  long resets = 0;
};

// i.i.d. uniform actions over the normalized cube; episodes of
// `episode_len` steps (the last may be shorter). Deterministic in seed.
Dataset collect_random(const EnvDescriptor& desc, std::size_t num_transitions,
                       std::size_t episode_len, std::uint64_t seed,
                       StepCounter* counter = nullptr);

// A length-n window (s_t, a_{t+1..t+n}, s_{t+1..t+n}) inside one episode.
// Windows never cross episode boundaries.
struct WindowRef {
  std::size_t episode;
  std::size_t start;
};

struct WindowSet {
  std::vector<WindowRef> windows;
  std::size_t n = 0;
  std::size_t skipped_episodes = 0;  // episodes shorter than n
};

WindowSet extract_sequences(const Dataset& ds, std::size_t n, std::size_t stride);

// Whole episodes go to one side or the other so sequence extraction stays
// valid; tuple counts are treated as minimum totals. Validation episodes
// are chosen by a seeded shuffle, the rest stay in collection order.
struct SplitResult {
  Dataset train;
  Dataset val;
};
SplitResult split(const Dataset& ds, std::size_t n_train, std::size_t n_val,
                  std::uint64_t seed);

NormStats compute_norm_stats(const Dataset& ds);

// SMD1 container: magic | u32 LE JSON header length | JSON header
// {env_id, state_dim, action_dim, dt, seed, episode_lengths[]} | payload of
// little-endian 64-bit floats, per episode, per step in (s, a, s_next) order.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// One row per transition with named columns.
void export_csv(const Dataset& ds, const std::string& path);

bool datasets_equal(const Dataset& a, const Dataset& b);

}  // namespace smrl
