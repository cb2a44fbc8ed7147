// Command-line entry point: train, roll out, evaluate measures, explain.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"

#include "bxrl/common/errors.hpp"
#include "bxrl/common/json_io.hpp"
#include "bxrl/explain/counterfactual.hpp"
#include "bxrl/explain/influence.hpp"
#include "bxrl/explain/reports.hpp"
#include "bxrl/explain/shapley.hpp"
#include "bxrl/policy/checkpoint.hpp"
#include "bxrl/train/records.hpp"
#include "bxrl/train/rollout.hpp"
#include "bxrl/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace bxrl;

namespace {

constexpr const char* kRunRootEnv = "BXRL_RUN_ROOT";

fs::path run_root() {
  const char* v = std::getenv(kRunRootEnv);
  return v && *v ? fs::path(v) : fs::path("runs");
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

// Observations from a rollout archive (.jsonl / .bin) or a record dump (.rec.gz).
std::vector<Observation> load_observations(const fs::path& path, std::size_t max_count) {
  std::vector<Observation> out;
  const std::string name = path.filename().string();
  if (name.size() > 7 && name.ends_with(".rec.gz")) {
    for (const auto& r : train::load_records(path).records) out.push_back(r.obs);
  } else {
    for (const auto& r : env::load_archive(path).records) out.push_back(r.obs);
  }
  if (out.empty()) throw ContractError("no observations in " + path.string());
  if (max_count > 0 && out.size() > max_count) {
    std::vector<Observation> thinned;
    for (std::size_t i = 0; i < max_count; ++i) thinned.push_back(out[i * out.size() / max_count]);
    out = std::move(thinned);
  }
  return out;
}

// ---------------------------------------------------------------- init

struct InitArgs {
  std::uint64_t seed = 0;
  fs::path out;
  double policy_gain = 0.01;
};

void cmd_init(const InitArgs& a) {
  policy::InitOptions opt;
  opt.policy_gain = a.policy_gain;
  const auto params = policy::PolicyParams::initialize(policy::NetworkShape{}, a.seed, opt);
  if (a.out.has_parent_path()) ensure_writable_dir(a.out.parent_path());
  policy::save_checkpoint(a.out, params, {a.seed, 0, 0});
  std::cout << "checkpoint " << a.out.string() << " id " << params.id() << "\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  train::TrainerConfig cfg;
  std::string optimizer = "adam";
  fs::path config_file;
  std::vector<fs::path> measures;
  fs::path out;
  bool quiet = false;
};

void cmd_train(const TrainArgs& a, const CLI::App& sub) {
  const train::TrainerConfig& f = a.cfg;
  train::TrainerConfig cfg = f;
  if (!a.config_file.empty()) {
    // Flags given explicitly override the file.
    cfg = train::TrainerConfig::from_json(read_json_file(a.config_file));
    auto given = [&](const char* flag) { return sub.count(flag) > 0; };
    if (given("--seed")) cfg.seed = f.seed;
    if (given("--timesteps")) cfg.total_timesteps = f.total_timesteps;
    if (given("--lr")) cfg.learning_rate = f.learning_rate;
    if (given("--n-envs")) cfg.n_envs = f.n_envs;
    if (given("--steps-per-env")) cfg.steps_per_env = f.steps_per_env;
    if (given("--minibatch-size")) cfg.minibatch_size = f.minibatch_size;
    if (given("--inner-epochs")) cfg.inner_epochs = f.inner_epochs;
    if (given("--kl-budget")) cfg.kl_budget = f.kl_budget;
    if (given("--gamma")) cfg.gamma = f.gamma;
    if (given("--lambda")) cfg.lambda = f.lambda;
    if (given("--clip-eps")) cfg.coefs.clip_eps = f.coefs.clip_eps;
    if (given("--max-grad-norm")) cfg.max_grad_norm = f.max_grad_norm;
    if (given("--archive-every")) cfg.archive_every = f.archive_every;
  }
  if (a.config_file.empty() || sub.count("--optimizer") > 0)
    cfg.optimizer = a.optimizer == "sgd" ? train::OptimizerKind::Sgd : train::OptimizerKind::Adam;
  cfg.validate();

  std::vector<train::NamedMeasure> named;
  for (const fs::path& p : a.measures) {
    auto m = measures::load_measure_file(p);
    named.push_back({m.name(), m});
  }
  const fs::path out = a.out.empty() ? run_root() / ("seed_" + std::to_string(cfg.seed)) : a.out;
  std::cout << "run directory " << out.string() << ", " << cfg.epochs() << " epochs of "
            << cfg.batch_size() << " steps\n";
  const auto report = [&](const train::EpochMetrics& m) {
    if (a.quiet) return;
    std::cout << "epoch " << m.epoch << " steps " << m.timesteps << " return " << fixed(m.mean_norm_return, 4)
              << " survival " << fixed(m.survival, 3) << " kl " << fixed(m.kl, 6);
    for (std::size_t i = 0; i < m.measures.size(); ++i)
      std::cout << " " << named[i].name << " " << fixed(m.measures[i], 6);
    std::cout << std::endl;
  };
  const train::TrainResult r = train::train(cfg, named, out, report);
  std::cout << "final checkpoint " << train::checkpoint_path(out, static_cast<int>(r.metrics.size())).string()
            << " id " << r.final_params.id() << "\n";
}

// ---------------------------------------------------------------- rollout

struct RolloutArgs {
  fs::path checkpoint;
  std::uint64_t seed = 0;
  int episodes = 10;
  fs::path out;
};

void cmd_rollout(const RolloutArgs& a) {
  std::optional<policy::Checkpoint> ck;
  if (!a.checkpoint.empty()) ck = policy::load_checkpoint(a.checkpoint);
  const auto archive = train::record_episodes(env::EnvConfig{}, ck ? &ck->params : nullptr, a.seed,
                                              a.episodes, ck ? ck->params.id() : "");
  if (a.out.has_parent_path()) ensure_writable_dir(a.out.parent_path());
  env::save_archive(a.out, archive);

  int survived = 0;
  double norm = 0.0;
  for (const auto& r : archive.records) {
    norm += r.reward.normalized;
    if (r.done && r.reward.collision_term == 0.0) ++survived;
  }
  const double horizon = env::EnvConfig{}.horizon;
  std::cout << "episodes " << a.episodes << " steps " << archive.records.size() << " survival "
            << fixed(static_cast<double>(survived) / a.episodes, 4) << " mean_norm_return "
            << fixed(norm / horizon / a.episodes, 4) << "\n"
            << "archive " << a.out.string() << "\n";
}

// ---------------------------------------------------------------- measure

struct MeasureArgs {
  fs::path checkpoint;
  fs::path measure;
  fs::path json_out;
};

void cmd_measure(const MeasureArgs& a) {
  const auto ck = policy::load_checkpoint(a.checkpoint);
  const auto m = measures::load_measure_file(a.measure);
  const double v = m.evaluate(ck.params);
  json j;
  j["measure"] = m.name();
  j["form"] = std::string(measures::form_name(m.form()));
  j["checkpoint_id"] = ck.params.id();
  j["value"] = v;
  std::cout << format_double(v) << "\n" << j.dump() << "\n";
  if (!a.json_out.empty()) write_json_file(a.json_out, j);
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
  fs::path run;
  fs::path out;
};

// Splits metrics.csv into a return-breakdown series and a measure series.
void cmd_plot(const PlotArgs& a) {
  std::istringstream in(read_text_file(a.run / "metrics.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    for (std::string c; std::getline(h, c, ',');) header.push_back(c);
  }
  if (header.size() < 8 || header[0] != "epoch") throw FormatError("unexpected metrics header in " + a.run.string());
  const fs::path out = a.out.empty() ? a.run / "plots" : a.out;
  ensure_writable_dir(out);
  std::string breakdown = "epoch,timesteps,collision,speed,lane,total\n";
  std::string series = "epoch,timesteps";
  for (std::size_t i = 8; i < header.size(); ++i) series += "," + header[i];
  series += "\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream s(line);
    for (std::string c; std::getline(s, c, ',');) f.push_back(c);
    if (f.size() != header.size()) throw FormatError("ragged row in metrics.csv: " + line);
    const double total = std::stod(f[4]) + std::stod(f[5]) + std::stod(f[6]);
    breakdown += f[0] + "," + f[1] + "," + f[4] + "," + f[5] + "," + f[6] + "," + format_double(total) + "\n";
    series += f[0] + "," + f[1];
    for (std::size_t i = 8; i < f.size(); ++i) series += "," + f[i];
    series += "\n";
  }
  write_text_file(out / "return_breakdown.csv", breakdown);
  write_text_file(out / "measures.csv", series);
  std::cout << "wrote " << (out / "return_breakdown.csv").string() << " and " << (out / "measures.csv").string()
            << "\n";
}

// ---------------------------------------------------------------- explain

struct InfluenceArgs {
  fs::path run;
  int epoch = 0;
  fs::path records;
  fs::path checkpoint;
  fs::path measure;
  fs::path out;
  std::size_t top = 10;
};

void cmd_influence(const InfluenceArgs& a) {
  fs::path records = a.records, checkpoint = a.checkpoint;
  if (!a.run.empty()) {
    if (a.epoch < 1) throw ConfigError("--epoch must name a training epoch (>= 1)");
    if (records.empty()) records = train::records_path(a.run, a.epoch);
    if (checkpoint.empty()) checkpoint = train::checkpoint_path(a.run, a.epoch - 1);
  }
  if (records.empty() || checkpoint.empty())
    throw ConfigError("give --run and --epoch, or --records and --checkpoint");
  const auto dump = train::load_records(records);
  const auto ck = policy::load_checkpoint(checkpoint);
  const auto m = measures::load_measure_file(a.measure);
  const auto report = explain::influence(dump, m, ck.params);

  ensure_writable_dir(a.out);
  write_json_file(a.out / "influence.json", explain::to_json(report));
  write_text_file(a.out / "influence.csv", explain::to_csv(report));
  std::cout << "influence of " << report.scores.size() << " records of epoch " << report.epoch << " on "
            << report.measure_name << " (m = " << fixed(report.measure_value) << ", snapshot "
            << report.snapshot_id << ")\n"
            << explain::top_k_table(report, a.top) << "report " << (a.out / "influence.json").string() << "\n";
}

struct ShapleyArgs {
  bool toy = false;
  std::string toy_target = "return";
  fs::path checkpoint;
  fs::path measure;
  std::vector<fs::path> dataset;
  std::string grouping = "rows";
  double tolerance = 1e-6;
  std::size_t max_obs = 0;
  fs::path out;
  std::size_t top = 10;
};

void cmd_shapley(const ShapleyArgs& a) {
  explain::ShapleyReport r;
  if (a.toy) {
    const auto mdp = explain::toy_chain_mdp();
    const auto target = a.toy_target == "return"
                            ? explain::return_target(mdp)
                            : explain::action_prob_target({0, 1, 2, 3, 4}, {1, 1, 1, 1, 1}, std::vector<double>(5, 0.2));
    r = explain::tabular_shapley(mdp, explain::toy_chain_policy(), target, a.toy_target,
                                 explain::FeatureGrouping::singletons(mdp.feature_names));
  } else {
    if (a.checkpoint.empty() || a.measure.empty() || a.dataset.empty())
      throw ConfigError("empirical Shapley needs --checkpoint, --measure and --dataset (or use --toy)");
    const auto ck = policy::load_checkpoint(a.checkpoint);
    const auto m = measures::load_measure_file(a.measure);
    std::vector<Observation> data;
    for (const fs::path& p : a.dataset) {
      const auto obs = load_observations(p, a.max_obs);
      data.insert(data.end(), obs.begin(), obs.end());
    }
    r = explain::empirical_shapley(m, ck.params, data, explain::FeatureGrouping::by_name(a.grouping), a.tolerance);
  }
  ensure_writable_dir(a.out);
  write_json_file(a.out / "shapley.json", explain::to_json(r));
  write_text_file(a.out / "shapley.csv", explain::to_csv(r));
  double sum = 0.0;
  for (double p : r.phi) sum += p;
  std::cout << "shapley (" << r.mode << ") of " << r.target << ": v(empty) = " << fixed(r.v_empty, 9)
            << ", v(full) = " << fixed(r.v_full, 9) << "\n"
            << explain::top_k_table(r, a.top) << "efficiency: sum(phi) = " << fixed(sum, 12)
            << ", v(full) - v(empty) = " << fixed(r.v_full - r.v_empty, 12)
            << ", gap = " << r.efficiency_gap() << (r.efficiency_gap() <= 1e-9 ? " (ok)" : " (VIOLATED)") << "\n"
            << "report " << (a.out / "shapley.json").string() << "\n";
}

struct CounterfactualArgs {
  fs::path checkpoint;
  fs::path measure;
  std::string target;
  explain::CounterfactualOptions opt;
  std::vector<fs::path> eval_obs;
  std::size_t max_obs = 512;
  fs::path out;
};

void cmd_counterfactual(CounterfactualArgs a) {
  const auto ck = policy::load_checkpoint(a.checkpoint);
  const auto m = measures::load_measure_file(a.measure);
  std::vector<Observation> obs;
  for (const fs::path& p : a.eval_obs) {
    const auto o = load_observations(p, a.max_obs);
    obs.insert(obs.end(), o.begin(), o.end());
  }
  if (obs.empty()) obs = m.functional().observations();
  if (a.target == "current") {
    a.opt.target = m.evaluate(ck.params);
  } else {
    try {
      std::size_t used = 0;
      a.opt.target = std::stod(a.target, &used);
      if (used != a.target.size()) throw std::invalid_argument(a.target);
    } catch (const std::exception&) {
      throw ConfigError("--target must be a number or 'current', got '" + a.target + "'");
    }
  }
  const auto r = explain::counterfactual(ck.params, m, obs, a.opt);

  ensure_writable_dir(a.out);
  json j = explain::to_json(r);
  j["measure"] = m.name();
  j["origin_id"] = ck.params.id();
  j["k"] = a.opt.k;
  j["pivot_every"] = a.opt.pivot_every;
  j["eval_observations"] = obs.size();
  write_json_file(a.out / "counterfactual.json", j);
  write_text_file(a.out / "trace.csv", explain::trace_csv(r));
  policy::save_checkpoint(a.out / "counterfactual.ckpt", r.params, ck.meta);

  // Probability shifts on the observations the measure reads.
  const auto& mobs = m.functional().observations();
  std::string shifts = "observation";
  for (Action act : kAllActions) shifts += std::string(",") + std::string(action_name(act));
  shifts += "\n";
  for (std::size_t i = 0; i < mobs.size(); ++i) {
    const auto p0 = policy::forward(ck.params, mobs[i]);
    const auto p1 = policy::forward(r.params, mobs[i]);
    shifts += std::to_string(i);
    for (int k = 0; k < kNumActions; ++k) shifts += "," + format_double(p1.action_probs[k] - p0.action_probs[k]);
    shifts += "\n";
  }
  write_text_file(a.out / "shifts.csv", shifts);

  std::cout << "counterfactual for " << m.name() << ": " << fixed(r.initial) << " -> " << fixed(r.achieved)
            << " (target " << fixed(r.target) << ")\n"
            << "steps: " << r.steps << " (" << r.stop_reason << ")\n"
            << "kl from origin: " << r.kl << " over " << obs.size() << " observations\n"
            << "report " << (a.out / "counterfactual.json").string() << "\n";
}

// ---------------------------------------------------------------- reference

void print_reference(const CLI::App& app) {
  std::cout << "# bxrl command reference\n\nDefault run root: $" << kRunRootEnv << " (else ./runs).\n";
  const auto options = [](const CLI::App& a) {
    for (const CLI::Option* o : a.get_options()) {
      if (o->get_name() == "--help") continue;
      std::cout << "- `" << o->get_name() << "`";
      if (!o->get_default_str().empty()) std::cout << " (default " << o->get_default_str() << ")";
      std::cout << ": " << o->get_description() << "\n";
    }
  };
  std::cout << "\n## global options\n\n";
  options(app);
  std::function<void(const CLI::App&, const std::string&)> walk = [&](const CLI::App& a, const std::string& prefix) {
    for (const CLI::App* sub : a.get_subcommands([](const CLI::App*) { return true; })) {
      const std::string name = prefix + sub->get_name();
      std::cout << "\n## " << name << "\n\n" << sub->get_description() << "\n\n";
      options(*sub);
      walk(*sub, name + " ");
    }
  };
  walk(app, "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-explainable RL workbench: highway PPO training, behavior measures and explainers"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

  InitArgs init;
  auto* c_init = app.add_subcommand("init", "Write an initial checkpoint");
  c_init->add_option("--seed", init.seed, "Initialisation seed")->capture_default_str();
  c_init->add_option("--out", init.out, "Checkpoint path")->required();
  c_init->add_option("--policy-gain", init.policy_gain, "Policy head gain; 0 gives the uniform policy")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a PPO agent and write a run directory");
  c_train->add_option("--seed", tr.cfg.seed, "Run seed")->capture_default_str();
  c_train->add_option("--timesteps", tr.cfg.total_timesteps, "Total environment steps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_train->add_option("--measure", tr.measures, "Measure or scenario file to log (repeatable)")
      ->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, std::string("Run directory (default $") + kRunRootEnv + "/seed_<seed>)");
  c_train->add_option("--config", tr.config_file, "Trainer config JSON; flags given explicitly override it")
      ->check(CLI::ExistingFile);
  c_train->add_option("--lr", tr.cfg.learning_rate, "Learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_train->add_option("--optimizer", tr.optimizer, "adam or sgd")->capture_default_str()->check(CLI::IsMember({"adam", "sgd"}));
  c_train->add_option("--n-envs", tr.cfg.n_envs, "Parallel environments")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--steps-per-env", tr.cfg.steps_per_env, "Steps per environment per epoch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_train->add_option("--minibatch-size", tr.cfg.minibatch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--inner-epochs", tr.cfg.inner_epochs, "Passes over each batch")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--kl-budget", tr.cfg.kl_budget, "Per-epoch KL limit, 0 = off")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_train->add_option("--gamma", tr.cfg.gamma, "Discount")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--lambda", tr.cfg.lambda, "GAE lambda")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--clip-eps", tr.cfg.coefs.clip_eps, "PPO clip range")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--max-grad-norm", tr.cfg.max_grad_norm, "Gradient norm clip, 0 = off")->capture_default_str();
  c_train->add_option("--archive-every", tr.cfg.archive_every, "Rollout archive every k epochs, 0 = never")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_train->add_flag("--quiet", tr.quiet, "No per-epoch lines");

  RolloutArgs ro;
  auto* c_rollout = app.add_subcommand("rollout", "Record full episodes to a rollout archive");
  c_rollout->add_option("--checkpoint", ro.checkpoint, "Policy checkpoint (default: uniform random actions)")
      ->check(CLI::ExistingFile);
  c_rollout->add_option("--seed", ro.seed, "Episode seed")->capture_default_str();
  c_rollout->add_option("--episodes", ro.episodes, "Episode count")->capture_default_str()->check(CLI::PositiveNumber);
  c_rollout->add_option("--out", ro.out, "Archive path (.jsonl or .bin)")->required();

  MeasureArgs me;
  auto* c_measure = app.add_subcommand("measure", "Evaluate a behavior measure on a checkpoint");
  c_measure->add_option("--checkpoint", me.checkpoint, "Policy checkpoint")->required();
  c_measure->add_option("--measure", me.measure, "Measure or scenario file")->required()->check(CLI::ExistingFile);
  c_measure->add_option("--json", me.json_out, "Also write the JSON result here");

  PlotArgs pl;
  auto* c_plot = app.add_subcommand("plot", "Write plot-ready CSV series from a run");
  c_plot->add_option("--run", pl.run, "Run directory")->required()->check(CLI::ExistingDirectory);
  c_plot->add_option("--out", pl.out, "Output directory (default <run>/plots)");

  auto* c_explain = app.add_subcommand("explain", "Explain a behavior measure");
  c_explain->require_subcommand(1);

  InfluenceArgs in;
  auto* c_inf = c_explain->add_subcommand("influence", "Training-record influence on a measure");
  c_inf->add_option("--run", in.run, "Run directory")->check(CLI::ExistingDirectory);
  c_inf->add_option("--epoch", in.epoch, "Epoch whose records to score");
  c_inf->add_option("--records", in.records, "Record dump (instead of --run/--epoch)");
  c_inf->add_option("--checkpoint", in.checkpoint, "Snapshot the records were collected under");
  c_inf->add_option("--measure", in.measure, "Measure or scenario file")->required()->check(CLI::ExistingFile);
  c_inf->add_option("--out", in.out, "Report directory")->required();
  c_inf->add_option("--top", in.top, "Rows in the printed table")->capture_default_str();

  ShapleyArgs sh;
  auto* c_sh = c_explain->add_subcommand("shapley", "Feature attribution of a measure or of the return");
  c_sh->add_flag("--toy", sh.toy, "Use the tabular five-state chain");
  c_sh->add_option("--toy-target", sh.toy_target, "return or right (mean pi(RIGHT|s))")
      ->capture_default_str()
      ->check(CLI::IsMember({"return", "right"}));
  c_sh->add_option("--checkpoint", sh.checkpoint, "Policy checkpoint")->check(CLI::ExistingFile);
  c_sh->add_option("--measure", sh.measure, "Measure or scenario file")->check(CLI::ExistingFile);
  c_sh->add_option("--dataset", sh.dataset, "Rollout archives or record dumps")->check(CLI::ExistingFile);
  c_sh->add_option("--grouping", sh.grouping, "rows, columns or entries")
      ->capture_default_str()
      ->check(CLI::IsMember({"rows", "columns", "entries"}));
  c_sh->add_option("--tolerance", sh.tolerance, "Feature match tolerance")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_sh->add_option("--max-obs", sh.max_obs, "Observations kept per dataset file, 0 = all")->capture_default_str();
  c_sh->add_option("--out", sh.out, "Report directory")->required();
  c_sh->add_option("--top", sh.top, "Rows in the printed table")->capture_default_str();

  CounterfactualArgs cf;
  auto* c_cf = c_explain->add_subcommand("counterfactual", "Closest policy reaching a target measure value");
  c_cf->add_option("--checkpoint", cf.checkpoint, "Starting checkpoint")->required()->check(CLI::ExistingFile);
  c_cf->add_option("--measure", cf.measure, "Measure or scenario file")->required()->check(CLI::ExistingFile);
  c_cf->add_option("--target", cf.target, "Target value m*, or 'current'")->required();
  c_cf->add_option("--k", cf.opt.k, "KL weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_cf->add_option("--pivot-every", cf.opt.pivot_every, "Steps between KL pivot resets")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_cf->add_option("--steps", cf.opt.max_steps, "Maximum gradient steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_cf->add_option("--huber", cf.opt.huber_delta, "Huber delta for |m - m*|, 0 = plain subgradient")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_cf->add_option("--eval-obs", cf.eval_obs, "Rollout archives or record dumps for the KL estimate "
                                              "(default: the measure's observations)")
      ->check(CLI::ExistingFile);
  c_cf->add_option("--max-obs", cf.max_obs, "Observations kept per file, 0 = all")->capture_default_str();
  c_cf->add_option("--out", cf.out, "Report directory")->required();

  app.add_subcommand("reference", "Print the flag reference as markdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    set_threads(threads);
    if (*c_init) cmd_init(init);
    else if (*c_train) cmd_train(tr, *c_train);
    else if (*c_rollout) cmd_rollout(ro);
    else if (*c_measure) cmd_measure(me);
    else if (*c_plot) cmd_plot(pl);
    else if (*c_inf) cmd_influence(in);
    else if (*c_sh) cmd_shapley(sh);
    else if (*c_cf) cmd_counterfactual(cf);
    else print_reference(app);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
