#include "bxrl/train/gae.hpp"

#include <string>

#include "bxrl/common/errors.hpp"

namespace bxrl::train {

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const unsigned char> dones, double gamma, double lambda,
                      double last_value) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw ContractError("compute_gae: lengths differ (rewards " + std::to_string(n) + ", values " +
                        std::to_string(values.size()) + ", dones " + std::to_string(dones.size()) + ")");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = last_value;
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
    next_value = values[t];
  }
  return out;
}

}  // namespace bxrl::train
