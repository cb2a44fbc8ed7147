#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bxrl/common/json_io.hpp"
#include "bxrl/common/rng.hpp"
#include "bxrl/common/types.hpp"

namespace bxrl::policy {

// Shared tanh trunk with a 5-logit policy head and a scalar value head.
// Flat parameter layout: for each hidden layer W (out x in, row-major) then
// b; then the policy head W, b; then the value head W, b.
struct NetworkShape {
  int inputs = kObsSize;
  std::vector<int> hidden = {64, 64};
  int actions = kNumActions;

  std::size_t param_count() const;
  void validate() const;
  json to_json() const;
  static NetworkShape from_json(const json& j);

  bool operator==(const NetworkShape&) const = default;
};

struct InitOptions {
  double hidden_gain = 1.4142135623730951;  // sqrt(2)
  double policy_gain = 0.01;
  double value_gain = 1.0;
};

using GradVector = std::vector<double>;

// Immutable parameter vector theta together with its shape.
class PolicyParams {
 public:
  PolicyParams() = default;
  // Throws ContractError if the count does not match or a value is not finite.
  PolicyParams(NetworkShape shape, std::vector<double> values);

  // Orthogonal initialisation from a seeded stream; biases start at zero.
  static PolicyParams initialize(const NetworkShape& shape, std::uint64_t seed,
                                 const InitOptions& options = {});

  const NetworkShape& shape() const { return shape_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }
  std::size_t size() const { return values_.size(); }

  // Content hash (16 hex chars) used as the snapshot / checkpoint id.
  std::string id() const;

  // Offset of the policy head weights; everything before belongs to the trunk.
  std::size_t policy_head_offset() const;
  std::size_t value_head_offset() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  NetworkShape shape_;
  std::vector<double> values_;
};

struct PolicyOutput {
  std::array<double, kNumActions> logits{};
  std::array<double, kNumActions> action_probs{};
  std::array<double, kNumActions> log_probs{};
  double value = 0.0;

  double prob(Action a) const { return action_probs[static_cast<std::size_t>(action_id(a))]; }
  double log_prob(Action a) const { return log_probs[static_cast<std::size_t>(action_id(a))]; }
};

// Per-layer activations kept for the backward pass.
struct ForwardCache {
  std::vector<Eigen::VectorXd> activations;  // input, then each hidden layer output
  PolicyOutput output;
};

PolicyOutput forward(const PolicyParams& params, std::span<const double> input);
PolicyOutput forward(const PolicyParams& params, std::span<const double> input, ForwardCache& cache);

// Accumulates d(loss)/d(theta) into `grad` given the loss adjoints of the
// logits and the value output.
void backward(const PolicyParams& params, const ForwardCache& cache,
              std::span<const double, kNumActions> dlogits, double dvalue,
              std::span<double> grad);

// Adjoint of the logits given adjoints of softmax probabilities and of the
// log-softmax outputs.
std::array<double, kNumActions> logits_adjoint(const PolicyOutput& out,
                                               std::span<const double, kNumActions> dprobs,
                                               std::span<const double, kNumActions> dlog_probs);

std::array<double, kNumActions> softmax(std::span<const double, kNumActions> logits);

struct Sample {
  Action action = Action::Idle;
  double log_prob = 0.0;
};

// Inverse-CDF draw from a categorical distribution.
Action sample_action(std::span<const double, kNumActions> probs, Rng& rng);
Sample sample(const PolicyParams& params, const Observation& obs, Rng& rng);

// D_KL(p || q) for categorical distributions given p and both log vectors.
double categorical_kl(std::span<const double, kNumActions> p,
                      std::span<const double, kNumActions> log_p,
                      std::span<const double, kNumActions> log_q);

double entropy(const PolicyOutput& out);

}  // namespace bxrl::policy
