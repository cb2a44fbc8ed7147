#include <array>

#include "bxrl/measures/measure.hpp"

namespace bxrl::measures {
namespace {

struct FixtureScenario {
  Action action;
  std::int64_t epoch;
  std::int64_t t;
  Observation obs;
};

// Rows: ego (absolute), then four NPCs (relative). Columns: presence, x, y, vx, vy.
const std::array<FixtureScenario, 6> kScenarios = {{
    {Action::Left, 148, 226,
     {1.000, 1.000, 0.750, 0.373, 0,
      1.000, 0.057, -0.500, -0.089, 0,
      1.000, 0.086, -0.250, -0.091, 0,
      1.000, 0.133, 0, -0.074, 0,
      1.000, 0.636, -0.500, -0.088, 0}},
    {Action::Left, 221, 118,
     {1.000, 1.000, 0.750, 0.375, 0,
      1.000, -0.024, -0.750, -0.107, 0,
      1.000, 0.047, -0.500, -0.113, 0,
      1.000, 0.072, -0.250, -0.102, 0,
      1.000, 0.336, -0.750, -0.106, 0}},
    {Action::Right, 92, 102,
     {1.000, 1.000, 0, 0.311, 0,
      1.000, -0.003, 0.750, -0.036, 0,
      1.000, 0.063, 0.500, -0.061, 0,
      1.000, 0.189, 0, -0.057, 0,
      1.000, 0.326, 0.250, -0.048, 0}},
    {Action::Right, 111, 142,
     {1.000, 1.000, 0.003, 0.323, -0.002,
      1.000, 0.053, 0.497, -0.063, 0.002,
      1.000, 0.121, -0.003, -0.066, 0.002,
      1.000, 0.182, 0.247, -0.055, 0.002,
      1.000, 0.335, 0.747, -0.073, 0.002}},
    {Action::Faster, 81, 233,
     {1.000, 1.000, 0.750, 0.259, 0,
      1.000, 0.010, -0.500, 0.001, 0,
      1.000, -0.026, -0.250, 0.013, 0,
      1.000, 0.066, 0, 0.005, 0,
      1.000, 0.131, -0.750, -0.003, 0}},
    {Action::Faster, 117, 130,
     {1.000, 1.000, 0.750, 0.321, 0,
      1.000, -0.021, -0.750, -0.066, 0,
      1.000, -0.023, -0.250, -0.067, 0,
      1.000, 0.088, 0, -0.066, 0,
      1.000, 0.191, -0.500, -0.053, 0}},
}};

ScenarioSet pair_set(const std::string& name, std::size_t first) {
  ScenarioSet set;
  set.name = name;
  for (std::size_t i = first; i < first + 2; ++i) {
    const FixtureScenario& s = kScenarios[i];
    set.entries.push_back({s.obs, s.action, 0.5, EntryProvenance{s.epoch, s.t}});
  }
  set.provenance = {{"source", "bundled collision scenarios"}};
  return set;
}

}  // namespace

BehaviorMeasure collision_measure_fixture() {
  const double third = 1.0 / 3.0;
  return BehaviorMeasure::weighted_combination(
      "m_c", {third, third, third},
      {BehaviorMeasure::mean_action_prob(pair_set("m_c.left", 0)),
       BehaviorMeasure::mean_action_prob(pair_set("m_c.right", 2)),
       BehaviorMeasure::mean_action_prob(pair_set("m_c.faster", 4))});
}

ScenarioSet collision_fixture_scenarios() {
  ScenarioSet set;
  set.name = "m_c";
  for (const FixtureScenario& s : kScenarios)
    set.entries.push_back({s.obs, s.action, 1.0 / 6.0, EntryProvenance{s.epoch, s.t}});
  set.provenance = {{"source", "bundled collision scenarios"}};
  return set;
}

}  // namespace bxrl::measures
