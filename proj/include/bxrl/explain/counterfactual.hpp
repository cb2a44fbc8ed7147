#pragma once

#include <string>
#include <vector>

#include "bxrl/measures/measure.hpp"

namespace bxrl::explain {

struct CounterfactualOptions {
  double target = 0.0;     // m*
  double k = 1.0;          // KL weight
  int pivot_every = 25;    // accepted steps between KL pivot resets
  int max_steps = 500;
  double huber_delta = 0.0;  // > 0 smooths |m - m*| near the target
  double initial_step = 0.1;
  double max_step = 10.0;
  int max_halvings = 60;
  double tolerance = 0.0;  // stop once |m - m*| <= tolerance

  // Throws ConfigError.
  void validate() const;
};

struct TraceEntry {
  int step = 0;
  int segment = 0;
  double objective = 0.0;  // against the segment's pivot
  double measure = 0.0;
  double kl_pivot = 0.0;
  double kl_origin = 0.0;
  double step_size = 0.0;
};

struct CounterfactualResult {
  policy::PolicyParams params;
  double initial = 0.0;
  double achieved = 0.0;
  double target = 0.0;
  double kl = 0.0;  // D_KL(pi_0 || pi_cf) averaged over the evaluation set
  int steps = 0;
  std::string stop_reason;
  std::vector<TraceEntry> trace;  // trace[0] is the starting point
};

// Minimises |m(pi) - m*| + k D_KL(pi_pivot || pi) by gradient descent with a
// backtracking line search, resetting the pivot to the current parameters
// every pivot_every accepted steps. KL is averaged over eval_obs. Throws
// DivergenceError when the objective becomes non-finite.
CounterfactualResult counterfactual(const policy::PolicyParams& theta0,
                                    const measures::BehaviorMeasure& measure,
                                    const std::vector<Observation>& eval_obs,
                                    const CounterfactualOptions& options);

// Mean D_KL(pi_p || pi_q) over the observations.
double mean_policy_kl(const policy::PolicyParams& p, const policy::PolicyParams& q,
                      const std::vector<Observation>& obs);

}  // namespace bxrl::explain
