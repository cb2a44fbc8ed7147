#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bxrl/explain/toy_mdp.hpp"
#include "bxrl/measures/measure.hpp"

namespace bxrl::explain {

inline constexpr int kMaxShapleyFeatures = 20;

// A feature of the attribution is a group of underlying feature indices.
struct FeatureGrouping {
  std::vector<std::string> names;
  std::vector<std::vector<int>> groups;

  std::size_t size() const { return groups.size(); }
  // One group per index 0..n-1.
  static FeatureGrouping singletons(const std::vector<std::string>& names);
  // The 25 observation entries, named "row.column".
  static FeatureGrouping observation_entries();
  // One group per observation row: ego, npc0 .. npc3.
  static FeatureGrouping observation_rows();
  // One group per observation column across all rows.
  static FeatureGrouping observation_columns();
  static FeatureGrouping by_name(const std::string& name);
};

struct ShapleyReport {
  std::string target;
  std::string mode;
  std::vector<std::string> features;
  std::vector<double> phi;
  double v_empty = 0.0;
  double v_full = 0.0;
  // |sum phi - (v_full - v_empty)|
  double efficiency_gap() const;
};

// v(C) for every coalition bitmask C < 2^n, evaluated in parallel; the
// callable must be safe to invoke concurrently.
using CoalitionValue = std::function<double(std::uint32_t)>;
std::vector<double> coalition_values(int n, const CoalitionValue& v);
std::vector<double> coalition_values_serial(int n, const CoalitionValue& v);

// Exact Shapley values from a table of all 2^n coalition values.
std::vector<double> shapley_from_values(int n, const std::vector<double>& values);

// Throws TractabilityError when n exceeds kMaxShapleyFeatures.
void check_tractable(std::size_t n);

using TabularTarget = std::function<double(const TabularPolicy&)>;

// Exact coalition values on a tabular MDP with the occupancy of pi.
ShapleyReport tabular_shapley(const TabularMdp& mdp, const TabularPolicy& pi,
                              const TabularTarget& target, const std::string& target_name,
                              const FeatureGrouping& grouping);

// J(pi) on the MDP.
TabularTarget return_target(const TabularMdp& mdp);
// sum_i w_i pi(a_i | s_i).
TabularTarget action_prob_target(std::vector<int> states, std::vector<int> actions,
                                 std::vector<double> weights);

// Approximate mode over a dataset of observations. For each observation o the
// measure reads, pi_C(.|o) averages pi(.|o') uniformly over the pool of dataset
// observations plus o itself whose coalition entries agree with o within
// `tolerance`.
ShapleyReport empirical_shapley(const measures::BehaviorMeasure& measure,
                                const policy::PolicyParams& params,
                                const std::vector<Observation>& dataset,
                                const FeatureGrouping& grouping, double tolerance = 1e-6);

}  // namespace bxrl::explain
