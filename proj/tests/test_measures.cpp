#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "bxrl/common/errors.hpp"
#include "bxrl/measures/measure.hpp"

using namespace bxrl;
using namespace bxrl::measures;
using bxrl::policy::PolicyParams;

namespace {

const std::filesystem::path kFixtures = BXRL_FIXTURE_DIR;

PolicyParams uniform_params() {
  policy::InitOptions opt;
  opt.policy_gain = 0.0;
  return PolicyParams::initialize(policy::NetworkShape{}, 1, opt);
}

PolicyParams lively_params(std::uint64_t seed) {
  policy::InitOptions opt;
  opt.policy_gain = 1.5;
  return PolicyParams::initialize(policy::NetworkShape{}, seed, opt);
}

std::array<double, kObsCols> row(const Observation& o, int r) {
  std::array<double, kObsCols> out{};
  for (int c = 0; c < kObsCols; ++c) out[static_cast<std::size_t>(c)] = o[obs_index(r, c)];
  return out;
}

Observation obs_with(double x) {
  Observation o{};
  o[0] = 1.0;
  o[1] = x;
  return o;
}

ScenarioSet two_entry_set() {
  ScenarioSet s;
  s.name = "pair";
  s.entries = {{obs_with(0.1), Action::Left, 0.25, std::nullopt},
               {obs_with(-0.4), Action::Faster, 0.75, std::nullopt}};
  return s;
}

}  // namespace

TEST_CASE("bundled fixture matches the published matrices") {
  const ScenarioSet s = load_scenarios(kFixtures / "m_c.json");
  REQUIRE(s.entries.size() == 6);
  CHECK(s == collision_fixture_scenarios());
  using R = std::array<double, kObsCols>;
  CHECK(row(s.entries[1].obs, 0) == R{1.000, 1.000, 0.750, 0.375, 0});
  CHECK(row(s.entries[4].obs, 2) == R{1.000, -0.026, -0.250, 0.013, 0});
  CHECK(row(s.entries[3].obs, 4) == R{1.000, 0.335, 0.747, -0.073, 0.002});
  const Action expected[] = {Action::Left, Action::Left, Action::Right,
                             Action::Right, Action::Faster, Action::Faster};
  for (std::size_t i = 0; i < 6; ++i) CHECK(s.entries[i].action == expected[i]);
  CHECK(s.entries[0].provenance == EntryProvenance{148, 226});
  CHECK(s.entries[5].provenance == EntryProvenance{117, 130});
}

TEST_CASE("collision measure on extreme policies") {
  const BehaviorMeasure mc = collision_measure_fixture();
  CHECK(std::abs(mc.evaluate(uniform_params()) - 0.2) <= 1e-12);
  const BehaviorMeasure from_file = load_measure_file(kFixtures / "m_c.json");
  CHECK(std::abs(from_file.evaluate(uniform_params()) - 0.2) <= 1e-12);
  const PolicyParams p = lively_params(5);
  CHECK(std::abs(mc.evaluate(p) - from_file.evaluate(p)) <= 1e-15);

  // Outputs that put all mass on the scenario's action.
  std::vector<policy::PolicyOutput> outs(mc.functional().observations().size());
  const ScenarioSet all = collision_fixture_scenarios();
  for (std::size_t i = 0; i < outs.size(); ++i) {
    outs[i].action_probs = {};
    outs[i].action_probs[static_cast<std::size_t>(action_id(all.entries[i].action))] = 1.0;
  }
  CHECK(mc.functional().evaluate_outputs(outs) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("contrast forms") {
  const PolicyParams p = lively_params(2);
  const Observation o = obs_with(0.3);
  CHECK(BehaviorMeasure::action_contrast("same", o, Action::Left, Action::Left).evaluate(p) == 0.0);
  const BehaviorMeasure ac = BehaviorMeasure::action_contrast("lr", o, Action::Left, Action::Right);
  const auto out = policy::forward(p, o);
  CHECK(ac.evaluate(p) == doctest::Approx(out.prob(Action::Left) - out.prob(Action::Right)));
  const BehaviorMeasure oc =
      BehaviorMeasure::observation_contrast("oc", o, obs_with(-0.3), Action::Faster);
  const auto out_q = policy::forward(p, obs_with(-0.3));
  CHECK(oc.evaluate(p) == doctest::Approx(out.prob(Action::Faster) - out_q.prob(Action::Faster)));
  CHECK(std::abs(oc.evaluate(p)) <= 1.0);
}

TEST_CASE("mean action probability stays strictly inside (0, 1)") {
  const BehaviorMeasure m = BehaviorMeasure::mean_action_prob(two_entry_set());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double v = m.evaluate(lively_params(seed));
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("linearity of combinations") {
  const PolicyParams p = lively_params(3);
  const BehaviorMeasure a = BehaviorMeasure::mean_action_prob(two_entry_set());
  const BehaviorMeasure b = BehaviorMeasure::action_contrast("ac", obs_with(0.2), Action::Idle, Action::Slower);
  const BehaviorMeasure combo = BehaviorMeasure::weighted_combination("combo", {2.5, -0.75}, {a, b});
  CHECK(std::abs(combo.evaluate(p) - (2.5 * a.evaluate(p) - 0.75 * b.evaluate(p))) <= 1e-12);

  const auto ga = a.gradient(p);
  const auto g_scaled = BehaviorMeasure::weighted_combination("3a", {3.0}, {a}).gradient(p);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(g_scaled[i] == doctest::Approx(3.0 * ga[i]).epsilon(1e-12));

  const auto g_zero = BehaviorMeasure::weighted_combination("a+0b", {1.0, 0.0}, {a, b}).gradient(p);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(g_zero[i] == doctest::Approx(ga[i]).epsilon(1e-14));

  const BehaviorMeasure c = BehaviorMeasure::constant("c", 0.5);
  CHECK(c.evaluate(p) == 0.5);
  for (double g : c.gradient(p)) CHECK(g == 0.0);
}

TEST_CASE("measure gradient matches central differences") {
  const BehaviorMeasure mc = collision_measure_fixture();
  const PolicyParams p = lively_params(9);
  const auto g = mc.gradient(p);
  Rng rng(12);
  const double h = 1e-5;
  for (int k = 0; k < 50; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(p.size())));
    auto plus = p.vector();
    auto minus = p.vector();
    plus[i] += h;
    minus[i] -= h;
    const double fd = (mc.evaluate(PolicyParams(p.shape(), plus)) -
                       mc.evaluate(PolicyParams(p.shape(), minus))) / (2 * h);
    CHECK(std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-8}) < 1e-5);
  }
}

TEST_CASE("evaluation depends only on outputs at stored observations") {
  const BehaviorMeasure m = BehaviorMeasure::mean_action_prob(two_entry_set());
  // Inputs 2..24 are zero in every stored observation, so the first-layer
  // weights reading them never influence the value.
  const PolicyParams p = lively_params(4);
  auto v = p.vector();
  Rng rng(3);
  for (int r = 0; r < 64; ++r)
    for (int c = 2; c < 25; ++c) v[static_cast<std::size_t>(r * 25 + c)] = rng.uniform(-5, 5);
  const PolicyParams q(p.shape(), v);
  CHECK(m.evaluate(q) == m.evaluate(p));
}

TEST_CASE("scenario validation") {
  ScenarioSet s = two_entry_set();
  s.validate();
  ScenarioSet empty;
  empty.name = "empty";
  CHECK_THROWS_AS(empty.validate(), ContractError);
  CHECK_THROWS_AS(BehaviorMeasure::mean_action_prob(empty), ContractError);
  ScenarioSet bad = s;
  bad.entries[0].weight = 0.3;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = s;
  bad.entries[0].weight = -0.25;
  bad.entries[1].weight = 1.25;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = s;
  bad.entries[0].obs[5] = 0.5;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = s;
  bad.entries[0].obs[7] = 1.5;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("scenario and measure files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "bxrl_test_measures";
  std::filesystem::create_directories(dir);
  const ScenarioSet s = two_entry_set();
  save_scenarios(dir / "s.json", s);
  CHECK(load_scenarios(dir / "s.json") == s);

  const BehaviorMeasure combo = BehaviorMeasure::weighted_combination(
      "combo", {0.5, 0.5},
      {BehaviorMeasure::mean_action_prob(s),
       BehaviorMeasure::observation_contrast("oc", obs_with(0.1), obs_with(0.2), Action::Left)},
      0.25);
  save_measure_file(dir / "m.json", combo);
  const BehaviorMeasure back = load_measure_file(dir / "m.json");
  const PolicyParams p = lively_params(6);
  CHECK(back.evaluate(p) == combo.evaluate(p));
  CHECK(back.to_json() == combo.to_json());

  write_json_file(dir / "ref.json", json{{"form", "mean_action_prob"}, {"scenario_file", "s.json"}});
  CHECK(load_measure_file(dir / "ref.json").evaluate(p) == BehaviorMeasure::mean_action_prob(s).evaluate(p));

  write_json_file(dir / "bad.json", json{{"form", "median"}});
  CHECK_THROWS_AS(load_measure_file(dir / "bad.json"), FormatError);
  write_json_file(dir / "bad2.json", json{{"schema_version", 1}, {"name", "x"}, {"entries", json::array({json{{"obs", {1, 2}}}})}});
  CHECK_THROWS_AS(load_measure_file(dir / "bad2.json"), FormatError);
}

TEST_CASE("building scenario sets from rollouts") {
  env::RolloutArchive archive;
  archive.header = {"cfg", 7, "ckpt"};
  for (int t = 0; t < 4; ++t) {
    env::RolloutRecord r;
    r.epoch = 1;
    r.t = t;
    r.obs = obs_with(0.1 * t);
    archive.records.push_back(r);
  }
  const ScenarioSet s = build_from_rollouts(archive, {{1, 0, Action::Left}, {1, 2, Action::Right}}, "sel");
  REQUIRE(s.entries.size() == 2);
  CHECK(s.entries[0].weight == 0.5);
  CHECK(s.entries[1].weight == 0.5);
  CHECK(s.entries[1].obs == archive.records[2].obs);
  CHECK(s.entries[1].provenance == EntryProvenance{1, 2});
  CHECK(s.provenance.at("checkpoint_id") == "ckpt");
  CHECK_THROWS_AS(build_from_rollouts(archive, {{1, 0, Action::Left}, {1, 0, Action::Right}}, "d"),
                  DuplicateError);
  try {
    build_from_rollouts(archive, {{2, 9, Action::Left}}, "m");
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()).find("epoch=2, t=9") != std::string::npos);
  }
}

TEST_CASE("bundled selections regenerate the fixture from an archive") {
  env::RolloutArchive archive;
  archive.header = {"cfg", 0, "run"};
  const ScenarioSet fixture = collision_fixture_scenarios();
  std::vector<Selection> picks;
  for (const ScenarioEntry& e : fixture.entries) {
    env::RolloutRecord r;
    r.epoch = e.provenance->epoch;
    r.t = e.provenance->t;
    r.obs = e.obs;
    archive.records.push_back(r);
    picks.push_back({r.epoch, r.t, e.action});
  }
  const ScenarioSet rebuilt = build_from_rollouts(archive, picks, "m_c");
  REQUIRE(rebuilt.entries.size() == fixture.entries.size());
  for (std::size_t i = 0; i < fixture.entries.size(); ++i) {
    CHECK(rebuilt.entries[i].obs == fixture.entries[i].obs);
    CHECK(rebuilt.entries[i].action == fixture.entries[i].action);
    CHECK(rebuilt.entries[i].weight == fixture.entries[i].weight);
  }
}
