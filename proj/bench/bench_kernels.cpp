// Serial reference kernels against their OpenMP counterparts.

#include <numeric>

#include <benchmark/benchmark.h>

#include "bxrl/explain/influence.hpp"
#include "bxrl/explain/shapley.hpp"
#include "bxrl/train/ppo_loss.hpp"
#include "bxrl/train/rollout.hpp"

using namespace bxrl;

namespace {

policy::PolicyParams params() {
  policy::InitOptions opt;
  opt.policy_gain = 1.0;
  return policy::PolicyParams::initialize(policy::NetworkShape{}, 3, opt);
}

train::RecordDump dump(const policy::PolicyParams& p, std::size_t n) {
  const auto archive = train::record_episodes(env::EnvConfig{}, &p, 5, 40, p.id());
  train::RecordDump d;
  d.checkpoint_id = p.id();
  Rng rng(1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = archive.records[i % archive.records.size()];
    const auto out = policy::forward(p, r.obs);
    train::TrainingRecord t;
    t.obs = r.obs;
    t.action = r.action;
    t.log_prob_old = out.log_prob(r.action);
    t.value_old = out.value;
    t.advantage = rng.normal();
    t.ret = out.value + rng.normal();
    t.t = static_cast<std::int64_t>(i);
    d.records.push_back(t);
  }
  return d;
}

void collect(benchmark::State& state, bool parallel) {
  const auto p = params();
  train::VecEnv venv(env::EnvConfig{}, 16, 1);
  for (auto _ : state) {
    auto b = parallel ? venv.collect(&p, 128) : venv.collect_serial(&p, 128);
    benchmark::DoNotOptimize(b);
  }
}

void minibatch(benchmark::State& state, bool parallel) {
  const auto p = params();
  const auto d = dump(p, 256);
  std::vector<std::size_t> idx(d.records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (auto _ : state) {
    auto r = parallel ? train::minibatch_loss_grad(p, d.records, idx, d.coefs)
                      : train::minibatch_loss_grad_serial(p, d.records, idx, d.coefs);
    benchmark::DoNotOptimize(r);
  }
}

void influence(benchmark::State& state, bool parallel) {
  const auto p = params();
  const auto d = dump(p, 512);
  const auto m = measures::collision_measure_fixture();
  for (auto _ : state) {
    auto r = parallel ? explain::influence(d, m, p) : explain::influence_serial(d, m, p);
    benchmark::DoNotOptimize(r);
  }
}

void coalitions(benchmark::State& state, bool parallel) {
  // Toy chain with ten features: the three originals plus copies.
  explain::TabularMdp mdp = explain::toy_chain_mdp();
  for (int c = 0; c < 7; ++c) {
    mdp.feature_names.push_back("copy" + std::to_string(c));
    for (auto& f : mdp.features) f.push_back(f[static_cast<std::size_t>(c % 3)]);
  }
  const auto pi = explain::toy_chain_policy();
  const auto occ = explain::occupancy(mdp, pi);
  const auto g = explain::FeatureGrouping::singletons(mdp.feature_names);
  const explain::CoalitionValue v = [&](std::uint32_t c) {
    return explain::expected_return(mdp, explain::marginalize(mdp, pi, occ, g.groups, c));
  };
  const int n = static_cast<int>(g.size());
  for (auto _ : state) {
    auto r = parallel ? explain::coalition_values(n, v) : explain::coalition_values_serial(n, v);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK_CAPTURE(collect, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(collect, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(minibatch, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(minibatch, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(influence, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(influence, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(coalitions, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(coalitions, parallel, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
