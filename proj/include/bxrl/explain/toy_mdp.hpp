#pragma once

#include <functional>
#include <string>
#include <vector>

namespace bxrl::explain {

// Finite discounted MDP with explicit state features, solved exactly.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.9;
  std::vector<double> start;                                 // [s]
  std::vector<std::vector<std::vector<double>>> transition;  // [s][a][s']
  std::vector<std::vector<double>> reward;                   // [s][a]
  std::vector<std::vector<double>> features;                 // [s][f]
  std::vector<std::string> feature_names;

  int n_features() const { return static_cast<int>(feature_names.size()); }
  // Throws ContractError on inconsistent sizes or non-stochastic rows.
  void validate() const;
};

// probs[s][a]
using TabularPolicy = std::vector<std::vector<double>>;

// State values V = (I - gamma P_pi)^-1 r_pi.
std::vector<double> state_values(const TabularMdp& mdp, const TabularPolicy& pi);
// J(pi) = sum_s start(s) V(s).
double expected_return(const TabularMdp& mdp, const TabularPolicy& pi);
// Normalised discounted state visitation of pi from the start distribution.
std::vector<double> occupancy(const TabularMdp& mdp, const TabularPolicy& pi);

// pi_C(a|s) = sum_{s'} d(s' | s'_C = s_C) pi(a|s'), with d the occupancy of pi.
// Feature j of the MDP belongs to C when groups[g] contains j for a set bit g
// of `coalition`. States whose matching set has zero occupancy fall back to a
// uniform average over the matching states.
TabularPolicy marginalize(const TabularMdp& mdp, const TabularPolicy& pi,
                          const std::vector<double>& occupancy,
                          const std::vector<std::vector<int>>& groups, std::uint32_t coalition);

// Five-state chain: actions LEFT / RIGHT move one state with probability 0.9
// and the other way otherwise (walls reflect). Reward 1 in state 4, 0.1 for
// LEFT in state 0. Features: s >= 2, s odd, s == 4.
TabularMdp toy_chain_mdp();
// pi(RIGHT | s) = 0.8, 0.6, 0.7, 0.9, 0.5.
TabularPolicy toy_chain_policy();

}  // namespace bxrl::explain
