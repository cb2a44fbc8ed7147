#include "bxrl/explain/shapley.hpp"

#include <cmath>

#include "bxrl/common/errors.hpp"

namespace bxrl::explain {

FeatureGrouping FeatureGrouping::singletons(const std::vector<std::string>& names) {
  FeatureGrouping g;
  g.names = names;
  for (std::size_t i = 0; i < names.size(); ++i) g.groups.push_back({static_cast<int>(i)});
  return g;
}

namespace {

const char* const kRowNames[kObsRows] = {"ego", "npc0", "npc1", "npc2", "npc3"};
const char* const kColNames[kObsCols] = {"presence", "x", "y", "vx", "vy"};

std::uint32_t full_mask(std::size_t n) { return n >= 32 ? ~0u : (1u << n) - 1u; }

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

FeatureGrouping FeatureGrouping::observation_entries() {
  FeatureGrouping g;
  for (int r = 0; r < kObsRows; ++r)
    for (int c = 0; c < kObsCols; ++c) {
      g.names.push_back(std::string(kRowNames[r]) + "." + kColNames[c]);
      g.groups.push_back({static_cast<int>(obs_index(r, c))});
    }
  return g;
}

FeatureGrouping FeatureGrouping::observation_rows() {
  FeatureGrouping g;
  for (int r = 0; r < kObsRows; ++r) {
    g.names.push_back(kRowNames[r]);
    std::vector<int> idx;
    for (int c = 0; c < kObsCols; ++c) idx.push_back(static_cast<int>(obs_index(r, c)));
    g.groups.push_back(idx);
  }
  return g;
}

FeatureGrouping FeatureGrouping::observation_columns() {
  FeatureGrouping g;
  for (int c = 0; c < kObsCols; ++c) {
    g.names.push_back(kColNames[c]);
    std::vector<int> idx;
    for (int r = 0; r < kObsRows; ++r) idx.push_back(static_cast<int>(obs_index(r, c)));
    g.groups.push_back(idx);
  }
  return g;
}

FeatureGrouping FeatureGrouping::by_name(const std::string& name) {
  if (name == "rows") return observation_rows();
  if (name == "columns") return observation_columns();
  if (name == "entries") return observation_entries();
  throw ConfigError("unknown feature grouping '" + name + "' (expected rows, columns or entries)");
}

double ShapleyReport::efficiency_gap() const {
  double sum = 0.0;
  for (double p : phi) sum += p;
  return std::abs(sum - (v_full - v_empty));
}

void check_tractable(std::size_t n) {
  if (n > static_cast<std::size_t>(kMaxShapleyFeatures))
    throw TractabilityError("exact Shapley over " + std::to_string(n) + " features needs 2^" +
                            std::to_string(n) + " coalitions; group features down to at most " +
                            std::to_string(kMaxShapleyFeatures));
}

std::vector<double> coalition_values(int n, const CoalitionValue& v) {
  check_tractable(static_cast<std::size_t>(n));
  const std::int64_t count = std::int64_t{1} << n;
  std::vector<double> out(static_cast<std::size_t>(count));
  std::vector<std::string> errors(out.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < count; ++c) {
    try {
      out[static_cast<std::size_t>(c)] = v(static_cast<std::uint32_t>(c));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(c)] = e.what();
    }
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw ContractError("coalition value failed: " + e);
  return out;
}

std::vector<double> coalition_values_serial(int n, const CoalitionValue& v) {
  check_tractable(static_cast<std::size_t>(n));
  std::vector<double> out(std::size_t{1} << n);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = v(static_cast<std::uint32_t>(c));
  return out;
}

std::vector<double> shapley_from_values(int n, const std::vector<double>& values) {
  check_tractable(static_cast<std::size_t>(n));
  if (values.size() != (std::size_t{1} << n)) throw ContractError("need one value per coalition");
  std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) weight[s] = 1.0 / (n * binomial(n - 1, s));
  std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const std::uint32_t bit = 1u << i;
    double acc = 0.0;
    for (std::uint32_t c = 0; c < values.size(); ++c) {
      if (c & bit) continue;
      acc += weight[std::popcount(c)] * (values[c | bit] - values[c]);
    }
    phi[i] = acc;
  }
  return phi;
}

ShapleyReport tabular_shapley(const TabularMdp& mdp, const TabularPolicy& pi,
                              const TabularTarget& target, const std::string& target_name,
                              const FeatureGrouping& grouping) {
  check_tractable(grouping.size());
  const std::vector<double> occ = occupancy(mdp, pi);
  const int n = static_cast<int>(grouping.size());
  const std::vector<double> values = coalition_values(n, [&](std::uint32_t c) {
    return target(marginalize(mdp, pi, occ, grouping.groups, c));
  });
  ShapleyReport r;
  r.target = target_name;
  r.mode = "tabular";
  r.features = grouping.names;
  r.phi = shapley_from_values(n, values);
  r.v_empty = values.front();
  r.v_full = values[full_mask(grouping.size())];
  return r;
}

TabularTarget return_target(const TabularMdp& mdp) {
  return [mdp](const TabularPolicy& pi) { return expected_return(mdp, pi); };
}

TabularTarget action_prob_target(std::vector<int> states, std::vector<int> actions,
                                 std::vector<double> weights) {
  if (states.size() != actions.size() || states.size() != weights.size())
    throw ContractError("target states, actions and weights must align");
  return [states = std::move(states), actions = std::move(actions),
          weights = std::move(weights)](const TabularPolicy& pi) {
    double m = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) m += weights[i] * pi.at(states[i]).at(actions[i]);
    return m;
  };
}

ShapleyReport empirical_shapley(const measures::BehaviorMeasure& measure,
                                const policy::PolicyParams& params,
                                const std::vector<Observation>& dataset,
                                const FeatureGrouping& grouping, double tolerance) {
  check_tractable(grouping.size());
  if (!(tolerance >= 0.0)) throw ContractError("tolerance must be non-negative");
  for (const auto& g : grouping.groups)
    for (int f : g)
      if (f < 0 || f >= kObsSize) throw ContractError("feature index out of range");

  const policy::Functional& f = measure.functional();
  const std::vector<Observation>& targets = f.observations();
  const std::vector<policy::PolicyOutput> target_out = f.policy_outputs(params);
  std::vector<policy::PolicyOutput> data_out(dataset.size());
  const auto nd = static_cast<std::ptrdiff_t>(dataset.size());
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < nd; ++i)
    data_out[static_cast<std::size_t>(i)] = policy::forward(params, dataset[static_cast<std::size_t>(i)]);

  const int n = static_cast<int>(grouping.size());
  const CoalitionValue value = [&](std::uint32_t c) {
    std::vector<int> known;
    for (int g = 0; g < n; ++g)
      if (c & (1u << g)) known.insert(known.end(), grouping.groups[g].begin(), grouping.groups[g].end());
    std::vector<policy::PolicyOutput> outs(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const Observation& o = targets[k];
      std::array<double, kNumActions> p = target_out[k].action_probs;
      double v = target_out[k].value;
      int count = 1;
      for (std::size_t d = 0; d < dataset.size(); ++d) {
        bool match = true;
        for (int j : known)
          if (std::abs(dataset[d][j] - o[j]) > tolerance) {
            match = false;
            break;
          }
        if (!match) continue;
        ++count;
        for (int a = 0; a < kNumActions; ++a) p[a] += data_out[d].action_probs[a];
        v += data_out[d].value;
      }
      policy::PolicyOutput& out = outs[k];
      for (int a = 0; a < kNumActions; ++a) {
        out.action_probs[a] = p[a] / count;
        out.log_probs[a] = std::log(out.action_probs[a]);
        out.logits[a] = out.log_probs[a];
      }
      out.value = v / count;
    }
    return f.evaluate_outputs(outs);
  };
  const std::vector<double> values = coalition_values(n, value);
  ShapleyReport r;
  r.target = measure.name();
  r.mode = "empirical";
  r.features = grouping.names;
  r.phi = shapley_from_values(n, values);
  r.v_empty = values.front();
  r.v_full = values[full_mask(grouping.size())];
  return r;
}

}  // namespace bxrl::explain
