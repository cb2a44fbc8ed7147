#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bxrl/env/highway.hpp"
#include "bxrl/env/rollout_archive.hpp"
#include "bxrl/policy/network.hpp"

namespace bxrl::train {

struct EpisodeStats {
  double norm_return = 0.0;  // sum of normalized rewards / horizon
  double raw_return = 0.0;
  double collision = 0.0;
  double speed = 0.0;
  double lane = 0.0;
  int length = 0;
  bool collided = false;
};

struct StepSample {
  Observation obs{};
  Action action = Action::Idle;
  double log_prob = 0.0;
  double value = 0.0;
  env::RewardBreakdown reward;
  bool done = false;
};

// Samples are env-major: samples[e * steps + k] is step k of env e.
struct Batch {
  int n_envs = 0;
  int steps = 0;
  std::vector<StepSample> samples;
  std::vector<double> bootstrap;       // V(s) after each env's last step, 0 if it ended
  std::vector<EpisodeStats> episodes;  // completed episodes, env by env
};

// A fixed set of environment instances stepped in lock-step. Episodes carry
// over between collect calls. Env e draws actions from its own stream and
// resets episode j with seed mix_seed(seed, e, j), so results do not depend
// on how envs are scheduled across threads.
class VecEnv {
 public:
  VecEnv(env::EnvConfig config, int n_envs, std::uint64_t seed);

  int size() const { return static_cast<int>(slots_.size()); }
  const env::HighwayEnv& env() const { return env_; }

  // `params` == nullptr samples actions uniformly.
  Batch collect(const policy::PolicyParams* params, int steps);
  Batch collect_serial(const policy::PolicyParams* params, int steps);

 private:
  struct Slot {
    env::EnvState state;
    Observation obs{};
    Rng actions;
    std::uint64_t episode = 0;
    EpisodeStats running;
  };

  void reset_slot(std::size_t e);
  void collect_one(std::size_t e, const policy::PolicyParams* params, int steps, Batch& batch,
                   std::vector<EpisodeStats>& episodes);

  env::HighwayEnv env_;
  std::uint64_t seed_;
  std::vector<Slot> slots_;
};

struct EvalResult {
  double mean_norm_return = 0.0;
  double survival = 0.0;
  std::vector<EpisodeStats> episodes;
};

// One full episode per seed; actions sampled from a per-seed stream.
EvalResult evaluate_policy(const env::EnvConfig& config, const policy::PolicyParams* params,
                           std::span<const std::uint64_t> seeds);

// Archive of a batch in env-major order with t = buffer index.
env::RolloutArchive batch_archive(const Batch& batch, std::int64_t epoch,
                                  const env::RolloutHeader& header);

// Episodes from fresh resets, for the rollout command.
env::RolloutArchive record_episodes(const env::EnvConfig& config, const policy::PolicyParams* params,
                                    std::uint64_t seed, int episodes, const std::string& checkpoint_id);

}  // namespace bxrl::train
