#include "bxrl/policy/functional.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bxrl/common/errors.hpp"

namespace bxrl::policy {
namespace {

constexpr std::array<std::pair<Op, std::string_view>, 21> kOpNames = {{
    {Op::Constant, "const"}, {Op::Prob, "prob"},   {Op::LogProb, "log_prob"},
    {Op::Value, "value"},    {Op::Add, "add"},     {Op::Sub, "sub"},
    {Op::Mul, "mul"},        {Op::Scale, "scale"}, {Op::Neg, "neg"},
    {Op::Log, "log"},        {Op::Exp, "exp"},     {Op::Abs, "abs"},
    {Op::Huber, "huber"},    {Op::Square, "square"}, {Op::Tanh, "tanh"},
    {Op::Relu, "relu"},      {Op::Clip, "clip"},   {Op::Min, "min"},
    {Op::Max, "max"},        {Op::Sign, "sign"},   {Op::Floor, "floor"},
}};

}  // namespace

std::string_view op_name(Op op) {
  for (const auto& [o, name] : kOpNames)
    if (o == op) return name;
  return "?";
}

Op parse_op(std::string_view name) {
  for (const auto& [o, n] : kOpNames)
    if (n == name) return o;
  throw UnsupportedOpError("unsupported primitive '" + std::string(name) + "'");
}

bool is_differentiable(Op op) { return op != Op::Sign && op != Op::Floor; }

int Functional::add_observation(const Observation& obs) {
  for (double v : obs)
    if (!std::isfinite(v)) throw ContractError("observation entries must be finite");
  observations_.push_back(obs);
  return static_cast<int>(observations_.size()) - 1;
}

Var Functional::push(Node n) {
  nodes_.push_back(n);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Functional::check(Var v) const {
  if (v.tape() != this || v.index() < 0 || v.index() >= static_cast<int>(nodes_.size()))
    throw ContractError("variable does not belong to this functional");
}

Var Functional::constant(double c) { return push({Op::Constant, -1, -1, -1, -1, c, 0.0}); }

Var Functional::prob(int obs, Action a) {
  if (obs < 0 || obs >= static_cast<int>(observations_.size()))
    throw ContractError("observation index out of range");
  return push({Op::Prob, -1, -1, obs, action_id(a), 0.0, 0.0});
}

Var Functional::log_prob(int obs, Action a) {
  if (obs < 0 || obs >= static_cast<int>(observations_.size()))
    throw ContractError("observation index out of range");
  return push({Op::LogProb, -1, -1, obs, action_id(a), 0.0, 0.0});
}

Var Functional::value(int obs) {
  if (obs < 0 || obs >= static_cast<int>(observations_.size()))
    throw ContractError("observation index out of range");
  return push({Op::Value, -1, -1, obs, -1, 0.0, 0.0});
}

Var Functional::unary(Op op, Var x, double p0, double p1) {
  check(x);
  switch (op) {
    case Op::Scale: case Op::Neg: case Op::Log: case Op::Exp: case Op::Abs:
    case Op::Huber: case Op::Square: case Op::Tanh: case Op::Relu: case Op::Clip:
    case Op::Sign: case Op::Floor:
      break;
    default:
      throw UnsupportedOpError("'" + std::string(op_name(op)) + "' is not a unary primitive");
  }
  if (op == Op::Huber && !(p0 > 0.0)) throw ContractError("huber delta must be positive");
  if (op == Op::Clip && !(p0 <= p1)) throw ContractError("clip bounds must satisfy lo <= hi");
  return push({op, x.index(), -1, -1, -1, p0, p1});
}

Var Functional::binary(Op op, Var a, Var b) {
  check(a);
  check(b);
  switch (op) {
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Min: case Op::Max:
      break;
    default:
      throw UnsupportedOpError("'" + std::string(op_name(op)) + "' is not a binary primitive");
  }
  return push({op, a.index(), b.index(), -1, -1, 0.0, 0.0});
}

Var Functional::weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  if (xs.size() != weights.size()) throw ContractError("weighted_sum: size mismatch");
  if (xs.empty()) return constant(0.0);
  Var acc = unary(Op::Scale, xs[0], weights[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) acc = binary(Op::Add, acc, unary(Op::Scale, xs[i], weights[i]));
  return acc;
}

void Functional::set_output(Var v) {
  check(v);
  output_ = v.index();
}

std::vector<PolicyOutput> Functional::policy_outputs(const PolicyParams& params) const {
  std::vector<PolicyOutput> outs;
  outs.reserve(observations_.size());
  for (const Observation& o : observations_) outs.push_back(forward(params, o));
  return outs;
}

void Functional::forward_values(std::span<const PolicyOutput> outputs, std::vector<double>& v) const {
  if (output_ < 0) throw ContractError("functional has no output");
  if (outputs.size() != observations_.size())
    throw ContractError("functional expects one policy output per observation");
  v.assign(nodes_.size(), 0.0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const double x = n.a >= 0 ? v[static_cast<std::size_t>(n.a)] : 0.0;
    const double y = n.b >= 0 ? v[static_cast<std::size_t>(n.b)] : 0.0;
    double r = 0.0;
    switch (n.op) {
      case Op::Constant: r = n.p0; break;
      case Op::Prob: r = outputs[static_cast<std::size_t>(n.obs)].action_probs[static_cast<std::size_t>(n.action)]; break;
      case Op::LogProb: r = outputs[static_cast<std::size_t>(n.obs)].log_probs[static_cast<std::size_t>(n.action)]; break;
      case Op::Value: r = outputs[static_cast<std::size_t>(n.obs)].value; break;
      case Op::Add: r = x + y; break;
      case Op::Sub: r = x - y; break;
      case Op::Mul: r = x * y; break;
      case Op::Scale: r = n.p0 * x; break;
      case Op::Neg: r = -x; break;
      case Op::Log: r = std::log(x); break;
      case Op::Exp: r = std::exp(x); break;
      case Op::Abs: r = std::abs(x); break;
      case Op::Huber: r = std::abs(x) <= n.p0 ? 0.5 * x * x / n.p0 : std::abs(x) - 0.5 * n.p0; break;
      case Op::Square: r = x * x; break;
      case Op::Tanh: r = std::tanh(x); break;
      case Op::Relu: r = x > 0.0 ? x : 0.0; break;
      case Op::Clip: r = std::clamp(x, n.p0, n.p1); break;
      case Op::Min: r = std::min(x, y); break;
      case Op::Max: r = std::max(x, y); break;
      case Op::Sign: r = static_cast<double>((x > 0.0) - (x < 0.0)); break;
      case Op::Floor: r = std::floor(x); break;
    }
    v[i] = r;
  }
}

double Functional::evaluate(const PolicyParams& params) const {
  const auto outs = policy_outputs(params);
  return evaluate_outputs(outs);
}

double Functional::evaluate_outputs(std::span<const PolicyOutput> outputs) const {
  std::vector<double> v;
  forward_values(outputs, v);
  return v[static_cast<std::size_t>(output_)];
}

double Functional::backprop_outputs(std::span<const PolicyOutput> outputs, Adjoints& adj) const {
  std::vector<double> v;
  forward_values(outputs, v);
  const std::size_t n_obs = observations_.size();
  adj.dprobs.assign(n_obs, {});
  adj.dlog_probs.assign(n_obs, {});
  adj.dvalue.assign(n_obs, 0.0);

  std::vector<double> g(nodes_.size(), 0.0);
  std::vector<char> live(nodes_.size(), 0);
  g[static_cast<std::size_t>(output_)] = 1.0;
  live[static_cast<std::size_t>(output_)] = 1;
  for (std::size_t i = static_cast<std::size_t>(output_) + 1; i-- > 0;) {
    if (!live[i]) continue;
    const Node& n = nodes_[i];
    if (!is_differentiable(n.op))
      throw UnsupportedOpError("primitive '" + std::string(op_name(n.op)) + "' has no gradient");
    const double gi = g[i];
    const auto a = static_cast<std::size_t>(n.a);
    const auto b = static_cast<std::size_t>(n.b);
    const double x = n.a >= 0 ? v[a] : 0.0;
    const double y = n.b >= 0 ? v[b] : 0.0;
    auto to_a = [&](double d) { g[a] += d; live[a] = 1; };
    auto to_b = [&](double d) { g[b] += d; live[b] = 1; };
    switch (n.op) {
      case Op::Constant: break;
      case Op::Prob: adj.dprobs[static_cast<std::size_t>(n.obs)][static_cast<std::size_t>(n.action)] += gi; break;
      case Op::LogProb: adj.dlog_probs[static_cast<std::size_t>(n.obs)][static_cast<std::size_t>(n.action)] += gi; break;
      case Op::Value: adj.dvalue[static_cast<std::size_t>(n.obs)] += gi; break;
      case Op::Add: to_a(gi); to_b(gi); break;
      case Op::Sub: to_a(gi); to_b(-gi); break;
      case Op::Mul: to_a(gi * y); to_b(gi * x); break;
      case Op::Scale: to_a(gi * n.p0); break;
      case Op::Neg: to_a(-gi); break;
      case Op::Log: to_a(gi / x); break;
      case Op::Exp: to_a(gi * v[i]); break;
      case Op::Abs: to_a(gi * static_cast<double>((x > 0.0) - (x < 0.0))); break;
      case Op::Huber:
        to_a(gi * (std::abs(x) <= n.p0 ? x / n.p0 : static_cast<double>((x > 0.0) - (x < 0.0))));
        break;
      case Op::Square: to_a(gi * 2.0 * x); break;
      case Op::Tanh: to_a(gi * (1.0 - v[i] * v[i])); break;
      case Op::Relu: to_a(x > 0.0 ? gi : 0.0); break;
      case Op::Clip: to_a(x >= n.p0 && x <= n.p1 ? gi : 0.0); break;
      case Op::Min:
        if (x <= y) to_a(gi); else to_b(gi);
        break;
      case Op::Max:
        if (x >= y) to_a(gi); else to_b(gi);
        break;
      case Op::Sign: case Op::Floor: break;
    }
  }
  return v[static_cast<std::size_t>(output_)];
}

GradVector grad_scalar(const PolicyParams& params, const Functional& f) {
  GradVector grad;
  value_and_grad(params, f, grad);
  return grad;
}

double value_and_grad(const PolicyParams& params, const Functional& f, GradVector& grad) {
  const auto& observations = f.observations();
  std::vector<ForwardCache> caches(observations.size());
  std::vector<PolicyOutput> outs(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) outs[i] = forward(params, observations[i], caches[i]);

  Functional::Adjoints adj;
  const double value = f.backprop_outputs(outs, adj);
  grad.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto dz = logits_adjoint(outs[i], adj.dprobs[i], adj.dlog_probs[i]);
    const bool any = adj.dvalue[i] != 0.0 ||
                     std::any_of(dz.begin(), dz.end(), [](double d) { return d != 0.0; });
    if (any) backward(params, caches[i], dz, adj.dvalue[i], grad);
  }
  return value;
}

Var operator+(Var a, Var b) { return a.tape()->binary(Op::Add, a, b); }
Var operator-(Var a, Var b) { return a.tape()->binary(Op::Sub, a, b); }
Var operator*(Var a, Var b) { return a.tape()->binary(Op::Mul, a, b); }
Var operator*(double c, Var x) { return x.tape()->unary(Op::Scale, x, c); }
Var operator*(Var x, double c) { return x.tape()->unary(Op::Scale, x, c); }
Var operator+(Var x, double c) { return x.tape()->binary(Op::Add, x, x.tape()->constant(c)); }
Var operator-(Var x, double c) { return x.tape()->binary(Op::Sub, x, x.tape()->constant(c)); }
Var operator-(Var x) { return x.tape()->unary(Op::Neg, x); }

}  // namespace bxrl::policy
