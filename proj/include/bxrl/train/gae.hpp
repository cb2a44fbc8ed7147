#pragma once

#include <span>
#include <vector>

namespace bxrl::train {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalised advantage estimation over one contiguous segment.
// values[t] = V(s_t); dones[t] != 0 means the episode ended after step t
// (bootstrap 0). `last_value` bootstraps the step after the segment when the
// final step is not terminal. Throws ContractError on length mismatch.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const unsigned char> dones, double gamma, double lambda,
                      double last_value = 0.0);

}  // namespace bxrl::train
