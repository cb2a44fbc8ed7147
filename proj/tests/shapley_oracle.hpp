#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "bxrl/explain/toy_mdp.hpp"

namespace bxrl::testing {

using explain::TabularMdp;
using explain::TabularPolicy;

// Oracle pieces computed without the library's linear solves.

inline std::vector<double> oracle_occupancy(const TabularMdp& m, const TabularPolicy& pi) {
  std::vector<double> d(5, 0.0), cur = m.start;
  double w = 1.0;
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> next(5, 0.0);
    for (int s = 0; s < 5; ++s) {
      d[s] += w * cur[s];
      for (int a = 0; a < 2; ++a)
        for (int t = 0; t < 5; ++t) next[t] += cur[s] * pi[s][a] * m.transition[s][a][t];
    }
    cur = next;
    w *= m.gamma;
  }
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  for (double& x : d) x /= total;
  return d;
}

inline double oracle_return(const TabularMdp& m, const TabularPolicy& pi) {
  std::vector<double> v(5, 0.0);
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> next(5, 0.0);
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 2; ++a) {
        double ev = 0.0;
        for (int t = 0; t < 5; ++t) ev += m.transition[s][a][t] * v[t];
        next[s] += pi[s][a] * (m.reward[s][a] + m.gamma * ev);
      }
    v = next;
  }
  double j = 0.0;
  for (int s = 0; s < 5; ++s) j += m.start[s] * v[s];
  return j;
}

// Conditional mixture over states sharing the known features, built from
// the joint of (state, key).
inline TabularPolicy oracle_marginal(const TabularMdp& m, const TabularPolicy& pi, const std::vector<int>& known) {
  const std::vector<double> d = oracle_occupancy(m, pi);
  auto key = [&](int s) {
    std::vector<double> k;
    for (int f : known) k.push_back(m.features[s][f]);
    return k;
  };
  TabularPolicy out(5, std::vector<double>(2, 0.0));
  for (int s = 0; s < 5; ++s) {
    double mass = 0.0;
    for (int t = 0; t < 5; ++t)
      if (key(t) == key(s)) mass += d[t];
    for (int t = 0; t < 5; ++t)
      if (key(t) == key(s))
        for (int a = 0; a < 2; ++a) out[s][a] += d[t] / mass * pi[t][a];
  }
  return out;
}

inline std::vector<double> permutation_shapley(int n, const std::function<double(const std::vector<int>&)>& v) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
  int count = 0;
  do {
    std::vector<int> members;
    double prev = v(members);
    for (int i : order) {
      members.push_back(i);
      std::vector<int> sorted = members;
      std::sort(sorted.begin(), sorted.end());
      const double cur = v(sorted);
      phi[i] += cur - prev;
      prev = cur;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& p : phi) p /= count;
  return phi;
}

}  // namespace bxrl::testing
