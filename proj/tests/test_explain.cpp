#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "doctest.h"

#include "bxrl/common/errors.hpp"
#include "bxrl/explain/counterfactual.hpp"
#include "bxrl/explain/influence.hpp"
#include "bxrl/explain/reports.hpp"
#include "bxrl/explain/shapley.hpp"
#include "bxrl/train/rollout.hpp"
#include "shapley_oracle.hpp"

using namespace bxrl;
using namespace bxrl::explain;
using policy::PolicyParams;
using train::TrainingRecord;
using namespace bxrl::testing;

namespace {

PolicyParams lively_params(std::uint64_t seed) {
  policy::InitOptions opt;
  opt.policy_gain = 1.5;
  return PolicyParams::initialize(policy::NetworkShape{}, seed, opt);
}

std::vector<Observation> rollout_observations(std::uint64_t seed, int episodes) {
  const auto archive = train::record_episodes(env::EnvConfig{}, nullptr, seed, episodes, "");
  std::vector<Observation> out;
  for (const auto& r : archive.records) out.push_back(r.obs);
  return out;
}

train::RecordDump record_dump(const PolicyParams& p, std::uint64_t seed, std::size_t n) {
  const std::vector<Observation> obs = rollout_observations(seed, 4);
  Rng rng(seed);
  train::RecordDump d;
  d.epoch = 7;
  d.checkpoint_id = p.id();
  for (std::size_t i = 0; i < n; ++i) {
    TrainingRecord r;
    r.obs = obs[(i * 7) % obs.size()];
    const auto out = policy::forward(p, r.obs);
    r.action = policy::sample_action(out.action_probs, rng);
    r.log_prob_old = out.log_prob(r.action);
    r.value_old = out.value;
    r.advantage = rng.normal();
    r.ret = r.value_old + rng.normal();
    r.epoch = 7;
    r.t = static_cast<std::int64_t>(i);
    d.records.push_back(r);
  }
  return d;
}

measures::BehaviorMeasure scaled(const measures::BehaviorMeasure& m, double c) {
  return measures::BehaviorMeasure::weighted_combination("scaled", {c}, {m});
}

}  // namespace

TEST_CASE("influence of a constant measure is zero") {
  const PolicyParams p = lively_params(1);
  const auto dump = record_dump(p, 2, 40);
  const InfluenceReport r = influence(dump, measures::BehaviorMeasure::constant("c", 0.3), p);
  REQUIRE(r.scores.size() == 40);
  for (double s : r.scores) CHECK(s == 0.0);
  CHECK(r.records[5] == RecordId{7, 5});
  CHECK(r.snapshot_id == p.id());
}

TEST_CASE("influence is linear in the measure and matches the serial kernel") {
  const PolicyParams p = lively_params(2);
  const auto dump = record_dump(p, 3, 60);
  const auto mc = measures::collision_measure_fixture();
  const InfluenceReport a = influence(dump, mc, p);
  const InfluenceReport b = influence(dump, scaled(mc, -2.5), p);
  const InfluenceReport s = influence_serial(dump, mc, p);
  CHECK(a.scores == s.scores);
  for (std::size_t i = 0; i < a.scores.size(); ++i)
    CHECK(b.scores[i] == doctest::Approx(-2.5 * a.scores[i]).epsilon(1e-12));
  CHECK(std::any_of(a.scores.begin(), a.scores.end(), [](double x) { return x != 0.0; }));

  omp_set_num_threads(1);
  const InfluenceReport one = influence(dump, mc, p);
  omp_set_num_threads(3);
  const InfluenceReport three = influence(dump, mc, p);
  CHECK(one.scores == three.scores);
}

TEST_CASE("influence scores add up to the minibatch gradient") {
  const PolicyParams p = lively_params(3);
  const auto dump = record_dump(p, 4, 64);
  const auto mc = measures::collision_measure_fixture();
  const InfluenceReport r = influence(dump, mc, p);
  std::vector<std::size_t> idx(dump.records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto batch = train::minibatch_loss_grad_serial(p, dump.records, idx, dump.coefs);
  const auto g = mc.gradient(p);
  double expected = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) expected -= g[i] * batch.grad[i];
  expected *= static_cast<double>(idx.size());
  const double total = std::accumulate(r.scores.begin(), r.scores.end(), 0.0);
  CHECK(std::abs(total - expected) <= 1e-9);
}

TEST_CASE("influence predicts the effect of a small SGD step") {
  const PolicyParams p = lively_params(4);
  const auto dump = record_dump(p, 5, 40);
  const auto mc = measures::collision_measure_fixture();
  const InfluenceReport r = influence(dump, mc, p);
  const double eta = 1e-6;
  const double m0 = mc.evaluate(p);
  int good = 0;
  for (std::size_t i = 0; i < dump.records.size(); ++i) {
    const auto g = train::record_gradient(p, dump.records[i], dump.coefs);
    std::vector<double> v = p.vector();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= eta * g[k];
    const double dm = mc.evaluate(PolicyParams(p.shape(), v)) - m0;
    const double pred = eta * r.scores[i];
    good += std::abs(dm - pred) <= 0.05 * std::abs(pred) ? 1 : 0;
  }
  CHECK(good >= 38);
}

TEST_CASE("influence refuses records from another snapshot") {
  const PolicyParams p = lively_params(5);
  const auto dump = record_dump(p, 6, 4);
  CHECK_THROWS_AS(influence(dump, measures::collision_measure_fixture(), lively_params(6)), ProvenanceError);
}

TEST_CASE("top-k orders by magnitude") {
  CHECK(top_k_by_magnitude({0.1, -3.0, 2.0, -2.0, 0.0}, 3) == std::vector<std::size_t>{1, 2, 3});
  CHECK(top_k_by_magnitude({1.0}, 5).size() == 1);
}

TEST_CASE("toy MDP solution agrees with iteration") {
  const TabularMdp m = toy_chain_mdp();
  const TabularPolicy pi = toy_chain_policy();
  CHECK(std::abs(expected_return(m, pi) - oracle_return(m, pi)) <= 1e-12);
  const auto d = occupancy(m, pi);
  const auto od = oracle_occupancy(m, pi);
  for (int s = 0; s < 5; ++s) CHECK(std::abs(d[s] - od[s]) <= 1e-12);

  const FeatureGrouping g = FeatureGrouping::singletons(m.feature_names);
  CHECK(marginalize(m, pi, d, g.groups, 0b111) == pi);
  const TabularPolicy none = marginalize(m, pi, d, g.groups, 0);
  for (int s = 1; s < 5; ++s) CHECK(none[s] == none[0]);
}

TEST_CASE("tabular Shapley matches permutation enumeration") {
  const TabularMdp m = toy_chain_mdp();
  const TabularPolicy pi = toy_chain_policy();
  const FeatureGrouping g = FeatureGrouping::singletons(m.feature_names);
  const auto prob_target = action_prob_target({1, 3, 4}, {1, 1, 0}, {0.5, 0.25, 0.25});

  for (int which = 0; which < 2; ++which) {
    const TabularTarget target = which == 0 ? return_target(m) : prob_target;
    const ShapleyReport r = tabular_shapley(m, pi, target, "t", g);
    const auto oracle = permutation_shapley(3, [&](const std::vector<int>& known) {
      const TabularPolicy pc = oracle_marginal(m, pi, known);
      if (which == 0) return oracle_return(m, pc);
      return 0.5 * pc[1][1] + 0.25 * pc[3][1] + 0.25 * pc[4][0];
    });
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r.phi[i] - oracle[i]) <= 1e-12);
    CHECK(r.efficiency_gap() <= 1e-9);
    CHECK(std::abs(r.v_full - target(pi)) <= 1e-15);
  }
}

TEST_CASE("Shapley axioms on the toy MDP") {
  const TabularPolicy pi = toy_chain_policy();
  TabularMdp m = toy_chain_mdp();
  // Feature 3 is constant, feature 4 duplicates feature 0.
  m.feature_names = {"far_half", "odd", "goal", "constant", "far_half_copy"};
  for (auto& f : m.features) {
    const double far = f[0];
    f.push_back(0.0);
    f.push_back(far);
  }
  const FeatureGrouping g = FeatureGrouping::singletons(m.feature_names);
  const ShapleyReport ret = tabular_shapley(m, pi, return_target(m), "J", g);
  CHECK(std::abs(ret.phi[3]) <= 1e-12);
  CHECK(std::abs(ret.phi[0] - ret.phi[4]) <= 1e-12);
  CHECK(ret.efficiency_gap() <= 1e-9);

  const auto t1 = action_prob_target({0, 2}, {1, 0}, {0.5, 0.5});
  const auto t2 = action_prob_target({4}, {1}, {1.0});
  const ShapleyReport a = tabular_shapley(m, pi, t1, "a", g);
  const ShapleyReport b = tabular_shapley(m, pi, t2, "b", g);
  const ShapleyReport ab = tabular_shapley(m, pi, [&](const TabularPolicy& p) { return t1(p) + t2(p); }, "ab", g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(ab.phi[i] - a.phi[i] - b.phi[i]) <= 1e-12);
}

TEST_CASE("coalition kernels agree and the feature bound is enforced") {
  const auto v = [](std::uint32_t c) { return std::sin(static_cast<double>(c)) + std::popcount(c); };
  CHECK(coalition_values(10, v) == coalition_values_serial(10, v));
  CHECK_THROWS_AS(coalition_values(21, v), TractabilityError);
  CHECK_THROWS_AS(check_tractable(25), TractabilityError);
  const PolicyParams p = lively_params(1);
  CHECK_THROWS_AS(empirical_shapley(measures::collision_measure_fixture(), p, {}, FeatureGrouping::observation_entries()),
                  TractabilityError);
  const std::vector<double> additive = [] {
    std::vector<double> out(16);
    for (std::uint32_t c = 0; c < 16; ++c) out[c] = (c & 1 ? 1.0 : 0.0) + (c & 4 ? 3.0 : 0.0);
    return out;
  }();
  CHECK(shapley_from_values(4, additive) == std::vector<double>{1.0, 0.0, 3.0, 0.0});
}

TEST_CASE("empirical Shapley on the collision measure") {
  const PolicyParams p = lively_params(7);
  const auto mc = measures::collision_measure_fixture();
  const std::vector<Observation> data = rollout_observations(9, 3);
  FeatureGrouping g = FeatureGrouping::observation_rows();
  g.names.push_back("ego.presence");
  g.groups.push_back({static_cast<int>(obs_index(0, 0))});
  const ShapleyReport r = empirical_shapley(mc, p, data, g);
  CHECK(r.mode == "empirical");
  CHECK(r.efficiency_gap() <= 1e-9);
  CHECK(r.v_full == doctest::Approx(mc.evaluate(p)).epsilon(1e-14));
  CHECK(std::abs(r.phi.back()) <= 1e-12);
}

TEST_CASE("counterfactual at the current value takes no steps") {
  const PolicyParams p = lively_params(8);
  const auto mc = measures::collision_measure_fixture();
  CounterfactualOptions o;
  o.target = mc.evaluate(p);
  const auto r = counterfactual(p, mc, rollout_observations(1, 2), o);
  CHECK(r.steps == 0);
  CHECK(r.params == p);
  CHECK(r.kl == 0.0);
}

TEST_CASE("counterfactual reaches the target and keeps a monotone trace") {
  const PolicyParams p = lively_params(9);
  const auto mc = measures::collision_measure_fixture();
  const auto obs = rollout_observations(2, 2);
  CounterfactualOptions o;
  o.target = 0.1;
  o.pivot_every = 10;
  o.max_steps = 200;
  const auto r = counterfactual(p, mc, obs, o);
  MESSAGE("m " << r.initial << " -> " << r.achieved << " in " << r.steps << " steps, KL " << r.kl);
  CHECK(std::abs(r.achieved - 0.1) <= 0.05);
  CHECK(r.kl > 0.0);
  for (std::size_t i = 1; i < r.trace.size(); ++i)
    if (r.trace[i].segment == r.trace[i - 1].segment) CHECK(r.trace[i].objective <= r.trace[i - 1].objective);
  CHECK(std::abs(mean_policy_kl(p, r.params, obs) - r.kl) <= 1e-15);

  o.huber_delta = 1e-3;
  const auto h = counterfactual(p, mc, obs, o);
  CHECK(std::abs(h.achieved - 0.1) <= 0.05);
}

TEST_CASE("a heavy KL weight pins the policy") {
  const PolicyParams p = lively_params(10);
  const auto mc = measures::collision_measure_fixture();
  const auto obs = rollout_observations(3, 2);
  auto displacement = [&](double k) {
    CounterfactualOptions o;
    o.target = 0.05;
    o.k = k;
    o.max_steps = 100;
    const auto r = counterfactual(p, mc, obs, o);
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d += std::pow(r.params.vector()[i] - p.vector()[i], 2);
    return std::sqrt(d);
  };
  const double loose = displacement(0.1), tight = displacement(1e6);
  MESSAGE("displacement k=0.1: " << loose << ", k=1e6: " << tight);
  CHECK(loose > 0.0);
  CHECK(tight <= 1e-3 * loose);
}

TEST_CASE("counterfactual rejects bad input and reports divergence") {
  const PolicyParams p = lively_params(11);
  const auto mc = measures::collision_measure_fixture();
  CounterfactualOptions o;
  o.pivot_every = 0;
  CHECK_THROWS_AS(counterfactual(p, mc, rollout_observations(1, 1), o), ConfigError);
  CHECK_THROWS_AS(counterfactual(p, mc, {}, CounterfactualOptions{}), ContractError);
  o = CounterfactualOptions{};
  o.target = 1.0;
  o.k = 1e308;
  o.initial_step = 1e6;
  o.max_step = 1e6;
  o.pivot_every = 1;
  CHECK_THROWS_AS(counterfactual(p, mc, rollout_observations(1, 1), o), DivergenceError);
}

TEST_CASE("reports serialise every entry") {
  const PolicyParams p = lively_params(12);
  const auto dump = record_dump(p, 1, 12);
  const InfluenceReport r = influence(dump, measures::collision_measure_fixture(), p);
  const json j = to_json(r);
  CHECK(j.at("scores").size() == 12);
  const std::string csv = to_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  const std::string table = top_k_table(r, 5);
  CHECK(std::count(table.begin(), table.end(), '\n') == 6);

  const TabularMdp m = toy_chain_mdp();
  const ShapleyReport s = tabular_shapley(m, toy_chain_policy(), return_target(m), "J",
                                          FeatureGrouping::singletons(m.feature_names));
  CHECK(to_json(s).at("phi").size() == 3);
  CHECK(to_csv(s).rfind("feature,phi\n", 0) == 0);
}
