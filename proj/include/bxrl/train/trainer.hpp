#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bxrl/env/highway.hpp"
#include "bxrl/measures/measure.hpp"
#include "bxrl/policy/network.hpp"
#include "bxrl/train/ppo_loss.hpp"

namespace bxrl::train {

enum class OptimizerKind { Adam, Sgd };

struct TrainerConfig {
  env::EnvConfig env;
  policy::NetworkShape network;
  policy::InitOptions init;
  std::uint64_t seed = 0;
  std::int64_t total_timesteps = 200000;
  int n_envs = 16;
  int steps_per_env = 128;  // N = n_envs * steps_per_env
  double gamma = 0.99;
  double lambda = 0.95;
  PpoCoefficients coefs;
  double learning_rate = 3e-4;
  int inner_epochs = 4;
  int minibatch_size = 256;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double kl_budget = 0.0;   // per-epoch D_KL(pi_old || pi_new) limit, 0 = off
  int archive_every = 10;   // rollout archive every k epochs, 0 = never
  int threads = 0;          // 0 = OpenMP default

  int batch_size() const { return n_envs * steps_per_env; }
  int epochs() const;
  // Throws ConfigError.
  void validate() const;
  json to_json() const;
  static TrainerConfig from_json(const json& j);
};

struct EpochMetrics {
  int epoch = 0;
  std::int64_t timesteps = 0;
  double mean_norm_return = 0.0;
  double survival = 0.0;
  double collision_comp = 0.0;
  double speed_comp = 0.0;
  double lane_comp = 0.0;
  double mean_raw_return = 0.0;
  double kl = 0.0;
  int episodes = 0;
  int inner_steps = 0;      // optimizer steps taken
  bool kl_stopped = false;  // inner epochs cut short by the KL budget
  std::vector<double> measures;
};

struct NamedMeasure {
  std::string name;
  measures::BehaviorMeasure measure;
};

struct TrainResult {
  std::filesystem::path run_dir;
  std::vector<EpochMetrics> metrics;
  policy::PolicyParams final_params;
};

// Run directory layout:
//   config.json                   trainer + environment config
//   metrics.csv                   one row per epoch
//   manifest.json                 artifact list with SHA-256 hashes
//   measures/<name>.json          registered measures
//   checkpoints/init.ckpt         initial parameters (+ .json sidecar)
//   checkpoints/epoch_XXXX.ckpt   parameters after update XXXX
//   records/epoch_XXXX.rec.gz     training records of epoch XXXX, collected
//                                 under the previous checkpoint
//   rollouts/epoch_XXXX.jsonl     rollout archive (every archive_every epochs)
//
// Epoch metrics describe episodes completed during collection; kl and the
// measure columns describe the checkpoint written after the update.
TrainResult train(const TrainerConfig& config, const std::vector<NamedMeasure>& measures,
                  const std::filesystem::path& run_dir,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

std::string metrics_csv_header(const std::vector<std::string>& measure_names);
std::string metrics_csv_row(const EpochMetrics& m);

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int epoch);
std::filesystem::path records_path(const std::filesystem::path& run_dir, int epoch);
std::filesystem::path rollout_path(const std::filesystem::path& run_dir, int epoch);

// Mean D_KL(p || q) over paired outputs.
double mean_kl(std::span<const policy::PolicyOutput> p, std::span<const policy::PolicyOutput> q);
std::vector<policy::PolicyOutput> batch_outputs(const policy::PolicyParams& params,
                                                std::span<const TrainingRecord> records);

}  // namespace bxrl::train
