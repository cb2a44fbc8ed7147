#include "bxrl/explain/counterfactual.hpp"

#include <cmath>

#include "bxrl/common/errors.hpp"

namespace bxrl::explain {

namespace {

using policy::GradVector;
using policy::PolicyOutput;
using policy::PolicyParams;

std::vector<PolicyOutput> outputs(const PolicyParams& p, const std::vector<Observation>& obs) {
  std::vector<PolicyOutput> out(obs.size());
  const auto n = static_cast<std::ptrdiff_t>(obs.size());
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = policy::forward(p, obs[static_cast<std::size_t>(i)]);
  return out;
}

double kl_against(const std::vector<PolicyOutput>& pivot, const std::vector<PolicyOutput>& cur) {
  double s = 0.0;
  for (std::size_t i = 0; i < pivot.size(); ++i)
    s += policy::categorical_kl(pivot[i].action_probs, pivot[i].log_probs, cur[i].log_probs);
  return s / static_cast<double>(pivot.size());
}

class Objective {
 public:
  Objective(const measures::BehaviorMeasure& m, const std::vector<Observation>& obs,
            const CounterfactualOptions& o)
      : measure_(m), obs_(obs), opt_(o) {}

  void set_pivot(const PolicyParams& p) { pivot_ = outputs(p, obs_); }

  double distance(double m) const {
    const double r = std::abs(m - opt_.target);
    if (opt_.huber_delta > 0.0 && r <= opt_.huber_delta) return 0.5 * r * r / opt_.huber_delta;
    return opt_.huber_delta > 0.0 ? r - 0.5 * opt_.huber_delta : r;
  }

  struct Eval {
    double objective = 0.0;
    double measure = 0.0;
    double kl = 0.0;
  };

  Eval value(const PolicyParams& p) const {
    Eval e;
    e.measure = measure_.evaluate(p);
    e.kl = kl_against(pivot_, outputs(p, obs_));
    e.objective = distance(e.measure) + opt_.k * e.kl;
    return e;
  }

  Eval value_and_grad(const PolicyParams& p, GradVector& grad) const {
    Eval e;
    e.measure = measure_.value_and_gradient(p, grad);
    const double r = e.measure - opt_.target;
    double slope = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    if (opt_.huber_delta > 0.0 && std::abs(r) <= opt_.huber_delta) slope = r / opt_.huber_delta;
    for (double& g : grad) g *= slope;

    // d KL(p || softmax(z)) / dz = softmax(z) - p
    const double scale = opt_.k / static_cast<double>(obs_.size());
    double kl = 0.0;
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      policy::ForwardCache cache;
      const PolicyOutput out = policy::forward(p, obs_[i], cache);
      kl += policy::categorical_kl(pivot_[i].action_probs, pivot_[i].log_probs, out.log_probs);
      std::array<double, kNumActions> dz{};
      for (int a = 0; a < kNumActions; ++a) dz[a] = scale * (out.action_probs[a] - pivot_[i].action_probs[a]);
      policy::backward(p, cache, dz, 0.0, grad);
    }
    e.kl = kl / static_cast<double>(obs_.size());
    e.objective = distance(e.measure) + opt_.k * e.kl;
    return e;
  }

 private:
  const measures::BehaviorMeasure& measure_;
  const std::vector<Observation>& obs_;
  const CounterfactualOptions& opt_;
  std::vector<PolicyOutput> pivot_;
};

std::string trace_tail(const std::vector<TraceEntry>& trace) {
  std::string s;
  const std::size_t from = trace.size() > 5 ? trace.size() - 5 : 0;
  for (std::size_t i = from; i < trace.size(); ++i)
    s += "\n  step " + std::to_string(trace[i].step) + ": objective " +
         std::to_string(trace[i].objective) + ", m " + std::to_string(trace[i].measure);
  return s;
}

}  // namespace

void CounterfactualOptions::validate() const {
  if (!std::isfinite(target)) throw ConfigError("counterfactual target must be finite");
  if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError("k must be a finite non-negative number");
  if (pivot_every < 1) throw ConfigError("pivot_every must be at least 1");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (!(huber_delta >= 0.0)) throw ConfigError("huber delta must be non-negative");
  if (!(initial_step > 0.0) || !(max_step >= initial_step))
    throw ConfigError("step sizes must satisfy 0 < initial_step <= max_step");
  if (max_halvings < 1) throw ConfigError("max_halvings must be at least 1");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be non-negative");
}

double mean_policy_kl(const PolicyParams& p, const PolicyParams& q, const std::vector<Observation>& obs) {
  if (obs.empty()) throw ContractError("KL needs at least one observation");
  return kl_against(outputs(p, obs), outputs(q, obs));
}

CounterfactualResult counterfactual(const PolicyParams& theta0, const measures::BehaviorMeasure& measure,
                                    const std::vector<Observation>& eval_obs,
                                    const CounterfactualOptions& options) {
  options.validate();
  if (eval_obs.empty()) throw ContractError("counterfactual search needs a non-empty evaluation set");

  const std::vector<PolicyOutput> origin = outputs(theta0, eval_obs);
  Objective obj(measure, eval_obs, options);
  obj.set_pivot(theta0);

  CounterfactualResult res;
  res.target = options.target;
  PolicyParams theta = theta0;
  GradVector grad(theta.size(), 0.0);
  Objective::Eval cur = obj.value_and_grad(theta, grad);
  res.initial = cur.measure;
  res.trace.push_back({0, 0, cur.objective, cur.measure, cur.kl, 0.0, 0.0});

  double step = options.initial_step;
  int segment = 0;
  res.stop_reason = "max_steps";
  for (int s = 1; s <= options.max_steps; ++s) {
    if (std::abs(cur.measure - options.target) <= options.tolerance && cur.kl == 0.0) {
      res.stop_reason = "at_target";
      break;
    }
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (gnorm2 == 0.0) {
      res.stop_reason = "stationary";
      break;
    }

    bool accepted = false;
    PolicyParams next;
    Objective::Eval trial;
    for (int h = 0; h < options.max_halvings; ++h, step *= 0.5) {
      std::vector<double> v = theta.vector();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * grad[i];
      bool finite = true;
      for (double x : v) finite = finite && std::isfinite(x);
      if (!finite) continue;
      next = PolicyParams(theta.shape(), std::move(v));
      trial = obj.value(next);
      if (!std::isfinite(trial.objective))
        throw DivergenceError("counterfactual objective is not finite" + trace_tail(res.trace));
      if (trial.objective < cur.objective) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.stop_reason = "line_search";
      break;
    }

    theta = std::move(next);
    res.steps = s;
    const double used = step;
    step = std::min(2.0 * step, options.max_step);
    if (s % options.pivot_every == 0) {
      obj.set_pivot(theta);
      ++segment;
    }
    cur = obj.value_and_grad(theta, grad);
    if (!std::isfinite(cur.objective))
      throw DivergenceError("counterfactual objective is not finite" + trace_tail(res.trace));
    res.trace.push_back({s, segment, cur.objective, cur.measure, cur.kl,
                         kl_against(origin, outputs(theta, eval_obs)), used});
  }

  res.params = theta;
  res.achieved = cur.measure;
  res.kl = kl_against(origin, outputs(theta, eval_obs));
  return res;
}

}  // namespace bxrl::explain
