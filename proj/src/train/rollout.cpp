#include "bxrl/train/rollout.hpp"

#include <cmath>

#include "bxrl/common/errors.hpp"

namespace bxrl::train {
namespace {

void accumulate(EpisodeStats& s, const env::RewardBreakdown& r, int horizon) {
  s.norm_return += r.normalized / horizon;
  s.raw_return += r.total;
  s.collision += r.collision_term;
  s.speed += r.speed_term;
  s.lane += r.lane_term;
  s.length += 1;
  s.collided = s.collided || r.collision_term != 0.0;
}

struct Choice {
  Action action;
  double log_prob;
  double value;
};

Choice choose(const policy::PolicyParams* params, const Observation& obs, Rng& rng) {
  if (params == nullptr)
    return {static_cast<Action>(rng.uniform_int(kNumActions)), std::log(1.0 / kNumActions), 0.0};
  const policy::PolicyOutput out = policy::forward(*params, obs);
  const Action a = policy::sample_action(out.action_probs, rng);
  return {a, out.log_prob(a), out.value};
}

}  // namespace

VecEnv::VecEnv(env::EnvConfig config, int n_envs, std::uint64_t seed)
    : env_(std::move(config)), seed_(seed) {
  if (n_envs <= 0) throw ConfigError("number of environments must be positive");
  slots_.resize(static_cast<std::size_t>(n_envs));
  for (std::size_t e = 0; e < slots_.size(); ++e) {
    slots_[e].actions = Rng::stream(seed, "rollout.actions", e);
    reset_slot(e);
  }
}

void VecEnv::reset_slot(std::size_t e) {
  Slot& s = slots_[e];
  auto r = env_.reset(mix_seed(seed_, e, s.episode));
  s.state = std::move(r.state);
  s.obs = r.observation;
  s.running = {};
  ++s.episode;
}

void VecEnv::collect_one(std::size_t e, const policy::PolicyParams* params, int steps, Batch& batch,
                         std::vector<EpisodeStats>& episodes) {
  Slot& slot = slots_[e];
  const int horizon = env_.config().horizon;
  for (int k = 0; k < steps; ++k) {
    StepSample& out = batch.samples[e * static_cast<std::size_t>(steps) + static_cast<std::size_t>(k)];
    const Choice c = choose(params, slot.obs, slot.actions);
    out.obs = slot.obs;
    out.action = c.action;
    out.log_prob = c.log_prob;
    out.value = c.value;
    out.reward = env_.step_inplace(slot.state, c.action, out.done);
    accumulate(slot.running, out.reward, horizon);
    if (out.done) {
      episodes.push_back(slot.running);
      reset_slot(e);
    } else {
      slot.obs = env_.observe(slot.state);
    }
  }
  const bool ended = batch.samples[e * static_cast<std::size_t>(steps) + static_cast<std::size_t>(steps) - 1].done;
  batch.bootstrap[e] = (ended || params == nullptr) ? 0.0 : policy::forward(*params, slot.obs).value;
}

Batch VecEnv::collect(const policy::PolicyParams* params, int steps) {
  if (steps <= 0) throw ContractError("steps per env must be positive");
  Batch batch;
  batch.n_envs = size();
  batch.steps = steps;
  batch.samples.resize(slots_.size() * static_cast<std::size_t>(steps));
  batch.bootstrap.assign(slots_.size(), 0.0);
  std::vector<std::vector<EpisodeStats>> episodes(slots_.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(slots_.size()); ++e)
    collect_one(static_cast<std::size_t>(e), params, steps, batch, episodes[static_cast<std::size_t>(e)]);
  for (auto& ep : episodes) batch.episodes.insert(batch.episodes.end(), ep.begin(), ep.end());
  return batch;
}

Batch VecEnv::collect_serial(const policy::PolicyParams* params, int steps) {
  if (steps <= 0) throw ContractError("steps per env must be positive");
  Batch batch;
  batch.n_envs = size();
  batch.steps = steps;
  batch.samples.resize(slots_.size() * static_cast<std::size_t>(steps));
  batch.bootstrap.assign(slots_.size(), 0.0);
  for (std::size_t e = 0; e < slots_.size(); ++e) collect_one(e, params, steps, batch, batch.episodes);
  return batch;
}

EvalResult evaluate_policy(const env::EnvConfig& config, const policy::PolicyParams* params,
                           std::span<const std::uint64_t> seeds) {
  const env::HighwayEnv env(config);
  EvalResult out;
  out.episodes.resize(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(seeds.size()); ++i) {
    const std::uint64_t seed = seeds[static_cast<std::size_t>(i)];
    Rng rng = Rng::stream(seed, "eval.actions");
    auto r = env.reset(seed);
    EpisodeStats& stats = out.episodes[static_cast<std::size_t>(i)];
    bool done = false;
    while (!done) {
      const Choice c = choose(params, r.observation, rng);
      accumulate(stats, env.step_inplace(r.state, c.action, done), config.horizon);
      if (!done) r.observation = env.observe(r.state);
    }
  }
  for (const EpisodeStats& s : out.episodes) {
    out.mean_norm_return += s.norm_return;
    out.survival += s.collided ? 0.0 : 1.0;
  }
  if (!seeds.empty()) {
    out.mean_norm_return /= static_cast<double>(seeds.size());
    out.survival /= static_cast<double>(seeds.size());
  }
  return out;
}

env::RolloutArchive batch_archive(const Batch& batch, std::int64_t epoch, const env::RolloutHeader& header) {
  env::RolloutArchive a;
  a.header = header;
  a.records.reserve(batch.samples.size());
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const StepSample& s = batch.samples[i];
    a.records.push_back({epoch, static_cast<std::int64_t>(i), s.obs, s.action, s.reward, s.done});
  }
  return a;
}

env::RolloutArchive record_episodes(const env::EnvConfig& config, const policy::PolicyParams* params,
                                    std::uint64_t seed, int episodes, const std::string& checkpoint_id) {
  if (episodes <= 0) throw ConfigError("episode count must be positive");
  const env::HighwayEnv env(config);
  env::RolloutArchive a;
  a.header = {config.hash(), seed, checkpoint_id};
  for (int ep = 0; ep < episodes; ++ep) {
    const std::uint64_t episode_seed = mix_seed(seed, static_cast<std::uint64_t>(ep));
    Rng rng = Rng::stream(episode_seed, "eval.actions");
    auto r = env.reset(episode_seed);
    bool done = false;
    std::int64_t t = 0;
    while (!done) {
      const Choice c = choose(params, r.observation, rng);
      const Observation obs = r.observation;
      const env::RewardBreakdown reward = env.step_inplace(r.state, c.action, done);
      a.records.push_back({ep, t++, obs, c.action, reward, done});
      if (!done) r.observation = env.observe(r.state);
    }
  }
  return a;
}

}  // namespace bxrl::train
