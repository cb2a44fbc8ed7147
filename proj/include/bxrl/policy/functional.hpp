#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bxrl/common/types.hpp"
#include "bxrl/policy/network.hpp"

namespace bxrl::policy {

// Scalar functionals of policy outputs over a fixed observation list.
//
// A Functional is a small expression tape whose leaves read pi(a|o),
// log pi(a|o) or V(o) at one of its stored observations. It is evaluated by
// running the network once per observation, and differentiated by reverse
// accumulation over the tape followed by the network's backward pass.
//
//   Functional f;
//   int o = f.add_observation(obs);
//   f.set_output(0.5 * (f.prob(o, Action::Left) - f.prob(o, Action::Right)));
//   double m = f.evaluate(params);
//   GradVector g = grad_scalar(params, f);
enum class Op {
  Constant,
  Prob,
  LogProb,
  Value,
  Add,
  Sub,
  Mul,
  Scale,     // p0 * x
  Neg,
  Log,
  Exp,
  Abs,       // subgradient 0 at the kink
  Huber,     // p0 = delta
  Square,
  Tanh,
  Relu,
  Clip,      // [p0, p1], subgradient 1 inside the closed interval
  Min,
  Max,
  Sign,      // evaluable, not differentiable
  Floor,     // evaluable, not differentiable
};

std::string_view op_name(Op op);
// Throws UnsupportedOpError for names outside the primitive set.
Op parse_op(std::string_view name);
bool is_differentiable(Op op);

class Functional;

class Var {
 public:
  Var() = default;
  int index() const { return index_; }
  Functional* tape() const { return tape_; }

 private:
  friend class Functional;
  Var(Functional* tape, int index) : tape_(tape), index_(index) {}
  Functional* tape_ = nullptr;
  int index_ = -1;
};

class Functional {
 public:
  Functional() = default;
  // Vars hold a pointer to their tape, so a Functional is not copied while
  // it is being built; finished tapes may be moved or copied freely.
  Functional(const Functional&) = default;
  Functional& operator=(const Functional&) = default;

  int add_observation(const Observation& obs);
  const std::vector<Observation>& observations() const { return observations_; }

  Var constant(double c);
  Var prob(int obs, Action a);
  Var log_prob(int obs, Action a);
  Var value(int obs);

  Var unary(Op op, Var x, double p0 = 0.0, double p1 = 0.0);
  Var binary(Op op, Var a, Var b);

  Var log(Var x) { return unary(Op::Log, x); }
  Var exp(Var x) { return unary(Op::Exp, x); }
  Var abs(Var x) { return unary(Op::Abs, x); }
  Var huber(Var x, double delta) { return unary(Op::Huber, x, delta); }
  Var square(Var x) { return unary(Op::Square, x); }
  Var tanh(Var x) { return unary(Op::Tanh, x); }
  Var relu(Var x) { return unary(Op::Relu, x); }
  Var clip(Var x, double lo, double hi) { return unary(Op::Clip, x, lo, hi); }
  Var min(Var a, Var b) { return binary(Op::Min, a, b); }
  Var max(Var a, Var b) { return binary(Op::Max, a, b); }
  // sum_i w_i x_i
  Var weighted_sum(std::span<const Var> xs, std::span<const double> weights);

  void set_output(Var v);
  bool has_output() const { return output_ >= 0; }
  std::size_t node_count() const { return nodes_.size(); }

  // Network outputs at every stored observation.
  std::vector<PolicyOutput> policy_outputs(const PolicyParams& params) const;

  double evaluate(const PolicyParams& params) const;
  // Evaluation on externally supplied outputs (one per observation), e.g.
  // a marginalised policy.
  double evaluate_outputs(std::span<const PolicyOutput> outputs) const;

  struct Adjoints {
    std::vector<std::array<double, kNumActions>> dprobs;
    std::vector<std::array<double, kNumActions>> dlog_probs;
    std::vector<double> dvalue;
  };
  // Value and adjoints of the leaves; throws UnsupportedOpError if a
  // non-differentiable node lies on the path to the output.
  double backprop_outputs(std::span<const PolicyOutput> outputs, Adjoints& adjoints) const;

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int obs = -1;
    int action = -1;
    double p0 = 0.0;
    double p1 = 0.0;
  };

  Var push(Node n);
  void check(Var v) const;
  void forward_values(std::span<const PolicyOutput> outputs, std::vector<double>& values) const;

  std::vector<Observation> observations_;
  std::vector<Node> nodes_;
  int output_ = -1;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double c, Var x);
Var operator*(Var x, double c);
Var operator+(Var x, double c);
Var operator-(Var x, double c);
Var operator-(Var x);

// Exact reverse-mode gradient of the functional at `params`.
GradVector grad_scalar(const PolicyParams& params, const Functional& f);
// Value and gradient in one pass.
double value_and_grad(const PolicyParams& params, const Functional& f, GradVector& grad);

}  // namespace bxrl::policy
