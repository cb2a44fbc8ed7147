#pragma once

#include <span>
#include <vector>

#include "bxrl/policy/network.hpp"
#include "bxrl/train/record.hpp"

namespace bxrl::train {

struct PpoCoefficients {
  double clip_eps = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;

  bool operator==(const PpoCoefficients&) const = default;
};

// Per-record loss, to be minimised:
//   -min(rho A, clip(rho, 1-eps, 1+eps) A) + c_v (V - R)^2 - c_e H(pi(.|o))
// with rho = pi(a|o) / pi_old(a|o). At the kink the unclipped branch is used.
struct LossParts {
  double loss = 0.0;
  double surrogate = 0.0;  // min(...) term, before the sign flip
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Loss of one record; accumulates scale * d(loss)/d(theta) into `grad` when
// it is non-empty.
LossParts record_loss_grad(const policy::PolicyParams& params, const TrainingRecord& record,
                           const PpoCoefficients& coefs, std::span<double> grad, double scale = 1.0);

struct BatchLoss {
  LossParts parts;           // means over the batch
  policy::GradVector grad;   // mean gradient
};

// Mean loss and gradient over records[indices]. The parallel kernel sums
// fixed-size chunks in a fixed order, so the result does not depend on the
// thread count.
BatchLoss minibatch_loss_grad(const policy::PolicyParams& params,
                              std::span<const TrainingRecord> records,
                              std::span<const std::size_t> indices, const PpoCoefficients& coefs);
BatchLoss minibatch_loss_grad_serial(const policy::PolicyParams& params,
                                     std::span<const TrainingRecord> records,
                                     std::span<const std::size_t> indices,
                                     const PpoCoefficients& coefs);

policy::GradVector record_gradient(const policy::PolicyParams& params, const TrainingRecord& record,
                                   const PpoCoefficients& coefs);

}  // namespace bxrl::train
