#include "bxrl/explain/toy_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "bxrl/common/errors.hpp"

namespace bxrl::explain {

namespace {

void check_policy(const TabularMdp& mdp, const TabularPolicy& pi) {
  if (static_cast<int>(pi.size()) != mdp.n_states) throw ContractError("policy has wrong state count");
  for (const auto& row : pi) {
    if (static_cast<int>(row.size()) != mdp.n_actions) throw ContractError("policy has wrong action count");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw ContractError("policy probability is negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("policy row does not sum to 1");
  }
}

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const TabularPolicy& pi) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int t = 0; t < mdp.n_states; ++t) p(s, t) += pi[s][a] * mdp.transition[s][a][t];
  return p;
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw ContractError("empty MDP");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("gamma must lie in [0, 1)");
  const auto ns = static_cast<std::size_t>(n_states);
  const auto na = static_cast<std::size_t>(n_actions);
  if (start.size() != ns || transition.size() != ns || reward.size() != ns || features.size() != ns)
    throw ContractError("MDP tables must have one entry per state");
  for (std::size_t s = 0; s < ns; ++s) {
    if (transition[s].size() != na || reward[s].size() != na)
      throw ContractError("MDP tables must have one entry per action");
    if (features[s].size() != feature_names.size())
      throw ContractError("state " + std::to_string(s) + " has the wrong feature count");
    for (const auto& row : transition[s]) {
      if (row.size() != ns) throw ContractError("transition row has wrong length");
      double sum = 0.0;
      for (double p : row) sum += p;
      if (std::abs(sum - 1.0) > 1e-12) throw ContractError("transition row does not sum to 1");
    }
  }
}

std::vector<double> state_values(const TabularMdp& mdp, const TabularPolicy& pi) {
  mdp.validate();
  check_policy(mdp, pi);
  const int n = mdp.n_states;
  Eigen::VectorXd r(n);
  for (int s = 0; s < n; ++s) {
    r(s) = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) r(s) += pi[s][a] * mdp.reward[s][a];
  }
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * policy_transition(mdp, pi);
  const Eigen::VectorXd v = m.fullPivLu().solve(r);
  return {v.data(), v.data() + n};
}

double expected_return(const TabularMdp& mdp, const TabularPolicy& pi) {
  const std::vector<double> v = state_values(mdp, pi);
  double j = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) j += mdp.start[s] * v[s];
  return j;
}

std::vector<double> occupancy(const TabularMdp& mdp, const TabularPolicy& pi) {
  mdp.validate();
  check_policy(mdp, pi);
  const int n = mdp.n_states;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * policy_transition(mdp, pi);
  Eigen::VectorXd mu(n);
  for (int s = 0; s < n; ++s) mu(s) = mdp.start[s];
  const Eigen::VectorXd d = m.transpose().fullPivLu().solve(mu);
  const double total = d.sum();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) out[s] = d(s) / total;
  return out;
}

TabularPolicy marginalize(const TabularMdp& mdp, const TabularPolicy& pi,
                          const std::vector<double>& occ,
                          const std::vector<std::vector<int>>& groups, std::uint32_t coalition) {
  std::vector<int> known;
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (coalition & (1u << g))
      for (int f : groups[g]) {
        if (f < 0 || f >= mdp.n_features()) throw ContractError("feature index out of range");
        known.push_back(f);
      }

  TabularPolicy out(pi.size(), std::vector<double>(static_cast<std::size_t>(mdp.n_actions), 0.0));
  for (int s = 0; s < mdp.n_states; ++s) {
    double wsum = 0.0;
    int matches = 0;
    std::vector<double> uniform(static_cast<std::size_t>(mdp.n_actions), 0.0);
    for (int t = 0; t < mdp.n_states; ++t) {
      const bool match = std::all_of(known.begin(), known.end(),
                                     [&](int f) { return mdp.features[t][f] == mdp.features[s][f]; });
      if (!match) continue;
      ++matches;
      wsum += occ[t];
      for (int a = 0; a < mdp.n_actions; ++a) {
        out[s][a] += occ[t] * pi[t][a];
        uniform[a] += pi[t][a];
      }
    }
    for (int a = 0; a < mdp.n_actions; ++a)
      out[s][a] = wsum > 0.0 ? out[s][a] / wsum : uniform[a] / matches;
  }
  return out;
}

TabularMdp toy_chain_mdp() {
  TabularMdp m;
  m.n_states = 5;
  m.n_actions = 2;
  m.gamma = 0.9;
  m.start.assign(5, 0.2);
  m.feature_names = {"far_half", "odd", "goal"};
  for (int s = 0; s < 5; ++s) {
    const int left = std::max(s - 1, 0), right = std::min(s + 1, 4);
    std::vector<double> go_left(5, 0.0), go_right(5, 0.0);
    go_left[left] += 0.9;
    go_left[right] += 0.1;
    go_right[right] += 0.9;
    go_right[left] += 0.1;
    m.transition.push_back({go_left, go_right});
    const double base = s == 4 ? 1.0 : 0.0;
    m.reward.push_back({base + (s == 0 ? 0.1 : 0.0), base});
    m.features.push_back({s >= 2 ? 1.0 : 0.0, s % 2 == 1 ? 1.0 : 0.0, s == 4 ? 1.0 : 0.0});
  }
  return m;
}

TabularPolicy toy_chain_policy() {
  TabularPolicy pi;
  for (double right : {0.8, 0.6, 0.7, 0.9, 0.5}) pi.push_back({1.0 - right, right});
  return pi;
}

}  // namespace bxrl::explain
