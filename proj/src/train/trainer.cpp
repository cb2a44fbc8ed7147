#include "bxrl/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <omp.h>

#include "bxrl/common/errors.hpp"
#include "bxrl/common/hashing.hpp"
#include "bxrl/policy/checkpoint.hpp"
#include "bxrl/train/gae.hpp"
#include "bxrl/train/records.hpp"
#include "bxrl/train/rollout.hpp"

namespace bxrl::train {
namespace {

constexpr const char* kToolVersion = "bxrl 1.0.0";

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid trainer config: " + what);
}

std::string epoch_tag(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04d", epoch);
  return buf;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

class Optimizer {
 public:
  explicit Optimizer(const TrainerConfig& c, std::size_t n) : c_(c), m_(n, 0.0), v_(n, 0.0) {}

  std::vector<double> step(std::span<const double> theta, std::span<const double> grad) {
    std::vector<double> next(theta.begin(), theta.end());
    const double lr = c_.learning_rate;
    if (c_.optimizer == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < next.size(); ++i) next[i] -= lr * grad[i];
      return next;
    }
    ++t_;
    const double b1 = c_.adam_beta1, b2 = c_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < next.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      next[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + c_.adam_eps);
    }
    return next;
  }

 private:
  const TrainerConfig& c_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

std::vector<TrainingRecord> build_records(const Batch& batch, const TrainerConfig& c, int epoch) {
  const std::size_t steps = static_cast<std::size_t>(batch.steps);
  std::vector<TrainingRecord> records(batch.samples.size());
  std::vector<double> raw_adv(records.size());
  for (std::size_t e = 0; e < static_cast<std::size_t>(batch.n_envs); ++e) {
    std::vector<double> rewards(steps), values(steps);
    std::vector<unsigned char> dones(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const StepSample& s = batch.samples[e * steps + k];
      rewards[k] = s.reward.normalized;
      values[k] = s.value;
      dones[k] = s.done ? 1 : 0;
    }
    const GaeResult g = compute_gae(rewards, values, dones, c.gamma, c.lambda, batch.bootstrap[e]);
    for (std::size_t k = 0; k < steps; ++k) {
      const std::size_t i = e * steps + k;
      const StepSample& s = batch.samples[i];
      TrainingRecord& r = records[i];
      r.obs = s.obs;
      r.action = s.action;
      r.reward = s.reward.normalized;
      r.log_prob_old = s.log_prob;
      r.value_old = s.value;
      r.ret = g.returns[k];
      r.epoch = epoch;
      r.t = static_cast<std::int64_t>(i);
      raw_adv[i] = g.advantages[k];
    }
  }
  const double n = static_cast<double>(raw_adv.size());
  const double mean = std::accumulate(raw_adv.begin(), raw_adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : raw_adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].advantage = (raw_adv[i] - mean) / (sd + 1e-8);
  return records;
}

void fill_episode_metrics(EpochMetrics& m, const std::vector<EpisodeStats>& episodes) {
  m.episodes = static_cast<int>(episodes.size());
  if (episodes.empty()) {
    const double nan = std::nan("");
    m.mean_norm_return = m.survival = m.collision_comp = m.speed_comp = m.lane_comp = m.mean_raw_return = nan;
    return;
  }
  for (const EpisodeStats& s : episodes) {
    m.mean_norm_return += s.norm_return;
    m.survival += s.collided ? 0.0 : 1.0;
    m.collision_comp += s.collision;
    m.speed_comp += s.speed;
    m.lane_comp += s.lane;
    m.mean_raw_return += s.raw_return;
  }
  const double inv = 1.0 / static_cast<double>(episodes.size());
  m.mean_norm_return *= inv;
  m.survival *= inv;
  m.collision_comp *= inv;
  m.speed_comp *= inv;
  m.lane_comp *= inv;
  m.mean_raw_return *= inv;
}

[[noreturn]] void divergence(const std::filesystem::path& run_dir, const policy::PolicyParams& last_good,
                             int epoch, int inner, std::size_t minibatch, const BatchLoss& bl,
                             const std::string& what) {
  const auto dir = run_dir / "diagnostics";
  std::filesystem::create_directories(dir);
  const auto dump = dir / (epoch_tag(epoch) + "_divergence.json");
  json j{{"epoch", epoch},
         {"inner_epoch", inner},
         {"minibatch", minibatch},
         {"reason", what},
         {"loss", format_double(bl.parts.loss)},
         {"surrogate", format_double(bl.parts.surrogate)},
         {"value_loss", format_double(bl.parts.value_loss)},
         {"entropy", format_double(bl.parts.entropy)},
         {"grad_norm", format_double(norm2(bl.grad))},
         {"last_good_checkpoint", "diagnostics/last_good.ckpt"},
         {"last_good_id", last_good.id()}};
  write_json_file(dump, j);
  policy::save_checkpoint(dir / "last_good.ckpt", last_good, {0, 0, epoch - 1});
  throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + " (" + what +
                        "); diagnostics in " + dump.string());
}

void write_manifest(const std::filesystem::path& run_dir, const TrainerConfig& c,
                    const std::vector<std::string>& checkpoints) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(run_dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  std::vector<std::string> rel;
  for (const auto& f : files) rel.push_back(std::filesystem::relative(f, run_dir).generic_string());
  std::sort(rel.begin(), rel.end());
  json artifacts = json::array();
  for (const std::string& r : rel)
    artifacts.push_back({{"path", r},
                         {"bytes", std::filesystem::file_size(run_dir / r)},
                         {"sha256", sha256_file(run_dir / r)}});
  json m{{"tool_version", kToolVersion},
         {"seed", c.seed},
         {"config", c.to_json()},
         {"checkpoints", checkpoints},
         {"artifacts", std::move(artifacts)}};
  write_json_file(run_dir / "manifest.json", m);
}

}  // namespace

int TrainerConfig::epochs() const {
  const std::int64_t n = batch_size();
  return static_cast<int>((total_timesteps + n - 1) / n);
}

void TrainerConfig::validate() const {
  env.validate();
  network.validate();
  require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  require(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
  require(coefs.clip_eps > 0.0, "clip epsilon must be > 0");
  require(coefs.value_coef >= 0.0 && coefs.entropy_coef >= 0.0, "loss coefficients must be >= 0");
  require(n_envs > 0 && steps_per_env > 0, "batch size N must be > 0");
  require(total_timesteps > 0, "total timesteps must be > 0");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning rate must be >= 0");
  require(inner_epochs >= 1, "inner epochs must be >= 1");
  require(minibatch_size >= 1 && minibatch_size <= batch_size(), "minibatch size must be in [1, N]");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must be in [0, 1)");
  require(adam_eps > 0.0, "adam epsilon must be > 0");
  require(kl_budget >= 0.0, "KL budget must be >= 0");
  require(archive_every >= 0, "archive interval must be >= 0");
  require(threads >= 0, "threads must be >= 0");
}

json TrainerConfig::to_json() const {
  return json{{"seed", seed},
              {"total_timesteps", total_timesteps},
              {"n_envs", n_envs},
              {"steps_per_env", steps_per_env},
              {"gamma", gamma},
              {"lambda", lambda},
              {"clip_eps", coefs.clip_eps},
              {"value_coef", coefs.value_coef},
              {"entropy_coef", coefs.entropy_coef},
              {"learning_rate", learning_rate},
              {"inner_epochs", inner_epochs},
              {"minibatch_size", minibatch_size},
              {"max_grad_norm", max_grad_norm},
              {"optimizer", optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
              {"adam_beta1", adam_beta1},
              {"adam_beta2", adam_beta2},
              {"adam_eps", adam_eps},
              {"kl_budget", kl_budget},
              {"archive_every", archive_every},
              {"network", network.to_json()},
              {"init",
               {{"hidden_gain", init.hidden_gain},
                {"policy_gain", init.policy_gain},
                {"value_gain", init.value_gain}}},
              {"env", env.to_json()}};
}

TrainerConfig TrainerConfig::from_json(const json& j) {
  TrainerConfig c;
  auto get = [&](const json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get(j, "seed", c.seed);
    get(j, "total_timesteps", c.total_timesteps);
    get(j, "n_envs", c.n_envs);
    get(j, "steps_per_env", c.steps_per_env);
    get(j, "gamma", c.gamma);
    get(j, "lambda", c.lambda);
    get(j, "clip_eps", c.coefs.clip_eps);
    get(j, "value_coef", c.coefs.value_coef);
    get(j, "entropy_coef", c.coefs.entropy_coef);
    get(j, "learning_rate", c.learning_rate);
    get(j, "inner_epochs", c.inner_epochs);
    get(j, "minibatch_size", c.minibatch_size);
    get(j, "max_grad_norm", c.max_grad_norm);
    if (j.contains("optimizer")) {
      const std::string o = j.at("optimizer").get<std::string>();
      if (o == "adam") c.optimizer = OptimizerKind::Adam;
      else if (o == "sgd") c.optimizer = OptimizerKind::Sgd;
      else throw ConfigError("unknown optimizer '" + o + "'");
    }
    get(j, "adam_beta1", c.adam_beta1);
    get(j, "adam_beta2", c.adam_beta2);
    get(j, "adam_eps", c.adam_eps);
    get(j, "kl_budget", c.kl_budget);
    get(j, "archive_every", c.archive_every);
    get(j, "threads", c.threads);
    if (j.contains("network")) c.network = policy::NetworkShape::from_json(j.at("network"));
    if (j.contains("init")) {
      get(j.at("init"), "hidden_gain", c.init.hidden_gain);
      get(j.at("init"), "policy_gain", c.init.policy_gain);
      get(j.at("init"), "value_gain", c.init.value_gain);
    }
    if (j.contains("env")) c.env = env::EnvConfig::from_json(j.at("env"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("trainer config: ") + e.what());
  }
  return c;
}

std::string metrics_csv_header(const std::vector<std::string>& measure_names) {
  std::string h = "epoch,timesteps,mean_norm_return,survival,collision_comp,speed_comp,lane_comp,kl";
  for (const std::string& n : measure_names) h += "," + n;
  return h;
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::string r = std::to_string(m.epoch) + "," + std::to_string(m.timesteps);
  for (double v : {m.mean_norm_return, m.survival, m.collision_comp, m.speed_comp, m.lane_comp, m.kl})
    r += "," + format_double(v);
  for (double v : m.measures) r += "," + format_double(v);
  return r;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int epoch) {
  if (epoch == 0) return run_dir / "checkpoints" / "init.ckpt";
  return run_dir / "checkpoints" / (epoch_tag(epoch) + ".ckpt");
}

std::filesystem::path records_path(const std::filesystem::path& run_dir, int epoch) {
  return run_dir / "records" / (epoch_tag(epoch) + ".rec.gz");
}

std::filesystem::path rollout_path(const std::filesystem::path& run_dir, int epoch) {
  return run_dir / "rollouts" / (epoch_tag(epoch) + ".jsonl");
}

double mean_kl(std::span<const policy::PolicyOutput> p, std::span<const policy::PolicyOutput> q) {
  if (p.size() != q.size()) throw ContractError("mean_kl: size mismatch");
  if (p.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    s += policy::categorical_kl(p[i].action_probs, p[i].log_probs, q[i].log_probs);
  return s / static_cast<double>(p.size());
}

std::vector<policy::PolicyOutput> batch_outputs(const policy::PolicyParams& params,
                                                std::span<const TrainingRecord> records) {
  std::vector<policy::PolicyOutput> out(records.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i)
    out[static_cast<std::size_t>(i)] = policy::forward(params, records[static_cast<std::size_t>(i)].obs);
  return out;
}

TrainResult train(const TrainerConfig& config, const std::vector<NamedMeasure>& measures,
                  const std::filesystem::path& run_dir,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  std::vector<std::string> names;
  for (const NamedMeasure& m : measures) {
    if (m.name.empty() || m.name.find_first_of(",\"/\\\n ") != std::string::npos)
      throw ConfigError("measure name '" + m.name + "' is not a valid CSV column / file name");
    if (std::find(names.begin(), names.end(), m.name) != names.end())
      throw ConfigError("measure name '" + m.name + "' registered twice");
    names.push_back(m.name);
  }
  if (config.threads > 0) omp_set_num_threads(config.threads);

  ensure_writable_dir(run_dir);
  for (const char* sub : {"checkpoints", "records", "rollouts", "measures"})
    std::filesystem::create_directories(run_dir / sub);
  write_json_file(run_dir / "config.json", config.to_json());
  for (const NamedMeasure& m : measures)
    measures::save_measure_file(run_dir / "measures" / (m.name + ".json"), m.measure);

  TrainResult result;
  result.run_dir = run_dir;
  policy::PolicyParams params = policy::PolicyParams::initialize(config.network, config.seed, config.init);
  policy::save_checkpoint(checkpoint_path(run_dir, 0), params, {config.seed, 0, 0});
  std::vector<std::string> checkpoints{"checkpoints/init.ckpt"};

  std::ofstream csv(run_dir / "metrics.csv", std::ios::trunc);
  if (!csv) throw ConfigError("cannot write " + (run_dir / "metrics.csv").string());
  csv << metrics_csv_header(names) << "\n";

  VecEnv venv(config.env, config.n_envs, config.seed);
  Optimizer opt(config, params.size());
  const env::RolloutHeader header_base{config.env.hash(), config.seed, ""};
  const std::size_t n = static_cast<std::size_t>(config.batch_size());
  const std::size_t mb = static_cast<std::size_t>(config.minibatch_size);

  for (int epoch = 1; epoch <= config.epochs(); ++epoch) {
    const std::string collection_id = params.id();
    const Batch batch = venv.collect(&params, config.steps_per_env);
    const std::vector<TrainingRecord> records = build_records(batch, config, epoch);
    save_records(records_path(run_dir, epoch), {epoch, collection_id, config.coefs, records});
    if (config.archive_every > 0 && epoch % config.archive_every == 0) {
      env::RolloutHeader h = header_base;
      h.checkpoint_id = collection_id;
      env::save_archive(rollout_path(run_dir, epoch), batch_archive(batch, epoch, h));
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.timesteps = static_cast<std::int64_t>(epoch) * static_cast<std::int64_t>(n);
    fill_episode_metrics(m, batch.episodes);

    const std::vector<policy::PolicyOutput> old_outputs = batch_outputs(params, records);
    Rng shuffle = Rng::stream(config.seed, "ppo.shuffle", static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(n);
    bool stop = false;
    for (int inner = 0; inner < config.inner_epochs && !stop; ++inner) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(static_cast<int>(i)))]);
      for (std::size_t start = 0; start < n && !stop; start += mb) {
        const std::span<const std::size_t> idx(order.data() + start, std::min(mb, n - start));
        BatchLoss bl = minibatch_loss_grad(params, records, idx, config.coefs);
        if (!std::isfinite(bl.parts.loss) || !all_finite(bl.grad))
          divergence(run_dir, params, epoch, inner, start / mb, bl, "non-finite loss or gradient");
        if (config.max_grad_norm > 0.0) {
          const double gn = norm2(bl.grad);
          if (gn > config.max_grad_norm)
            for (double& g : bl.grad) g *= config.max_grad_norm / gn;
        }
        std::vector<double> next = opt.step(params.values(), bl.grad);
        if (!all_finite(next))
          divergence(run_dir, params, epoch, inner, start / mb, bl, "non-finite parameters after update");

        if (config.kl_budget > 0.0) {
          policy::PolicyParams candidate(params.shape(), next);
          if (mean_kl(old_outputs, batch_outputs(candidate, records)) > config.kl_budget) {
            // Shrink the step towards the previous parameters until inside the budget.
            stop = true;
            const auto prev = params.values();
            const std::vector<double> full = next;
            bool found = false;
            double frac = 1.0;
            for (int k = 0; k < 40 && !found; ++k) {
              frac *= 0.5;
              for (std::size_t i = 0; i < next.size(); ++i) next[i] = prev[i] + frac * (full[i] - prev[i]);
              candidate = policy::PolicyParams(params.shape(), next);
              found = mean_kl(old_outputs, batch_outputs(candidate, records)) <= config.kl_budget;
            }
            if (!found) next.assign(prev.begin(), prev.end());
            m.kl_stopped = true;
          }
        }
        params = policy::PolicyParams(params.shape(), std::move(next));
        ++m.inner_steps;
      }
    }

    m.kl = mean_kl(old_outputs, batch_outputs(params, records));
    policy::save_checkpoint(checkpoint_path(run_dir, epoch), params,
                            {config.seed, m.timesteps, static_cast<std::int64_t>(epoch)});
    checkpoints.push_back(std::filesystem::relative(checkpoint_path(run_dir, epoch), run_dir).generic_string());
    for (const NamedMeasure& nm : measures) m.measures.push_back(nm.measure.evaluate(params));

    csv << metrics_csv_row(m) << "\n";
    csv.flush();
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  csv.close();
  write_manifest(run_dir, config, checkpoints);
  result.final_params = params;
  return result;
}

}  // namespace bxrl::train
