#include "bxrl/policy/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bxrl/common/errors.hpp"
#include "bxrl/common/hashing.hpp"

namespace bxrl::policy {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

// Offsets of one affine layer inside the flat vector.
struct Layer {
  int in;
  int out;
  std::size_t weights;
  std::size_t bias;
};

std::vector<Layer> layout(const NetworkShape& shape) {
  std::vector<Layer> layers;
  std::size_t offset = 0;
  int in = shape.inputs;
  auto add = [&](int out) {
    const std::size_t w = offset;
    offset += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    const std::size_t b = offset;
    offset += static_cast<std::size_t>(out);
    layers.push_back({in, out, w, b});
  };
  for (int h : shape.hidden) {
    add(h);
    in = h;
  }
  const int trunk = in;
  add(shape.actions);
  in = trunk;
  add(1);
  return layers;
}

RowMatrix orthogonal(int rows, int cols, double gain, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd gaussian(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) gaussian(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (int j = 0; j < small; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  RowMatrix w = rows >= cols ? RowMatrix(q) : RowMatrix(q.transpose());
  return gain * w;
}

}  // namespace

std::size_t NetworkShape::param_count() const {
  const auto layers = layout(*this);
  const Layer& last = layers.back();
  return last.bias + static_cast<std::size_t>(last.out);
}

void NetworkShape::validate() const {
  if (inputs != kObsSize) throw ContractError("network input must be 25, got " + std::to_string(inputs));
  if (actions != kNumActions) throw ContractError("network must have 5 action logits");
  if (hidden.empty()) throw ContractError("network needs at least one hidden layer");
  for (int h : hidden)
    if (h <= 0) throw ContractError("hidden layer sizes must be positive");
}

json NetworkShape::to_json() const {
  return json{{"inputs", inputs}, {"hidden", hidden}, {"actions", actions}};
}

NetworkShape NetworkShape::from_json(const json& j) {
  NetworkShape s;
  s.inputs = j.at("inputs").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.actions = j.at("actions").get<int>();
  return s;
}

PolicyParams::PolicyParams(NetworkShape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  shape_.validate();
  if (values_.size() != shape_.param_count())
    throw ContractError("parameter count " + std::to_string(values_.size()) +
                        " does not match shape (" + std::to_string(shape_.param_count()) + ")");
  for (double v : values_)
    if (!std::isfinite(v)) throw ContractError("policy parameters must be finite");
}

PolicyParams PolicyParams::initialize(const NetworkShape& shape, std::uint64_t seed,
                                      const InitOptions& options) {
  shape.validate();
  std::vector<double> values(shape.param_count(), 0.0);
  Rng rng = Rng::stream(seed, "policy.init");
  const auto layers = layout(shape);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    double gain = options.hidden_gain;
    if (i + 2 == layers.size()) gain = options.policy_gain;
    if (i + 1 == layers.size()) gain = options.value_gain;
    MatMap w(values.data() + l.weights, l.out, l.in);
    if (gain == 0.0) {
      w.setZero();
    } else {
      w = orthogonal(l.out, l.in, gain, rng);
    }
  }
  return PolicyParams(shape, std::move(values));
}

std::string PolicyParams::id() const {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(values_.data());
  std::string text = shape_.to_json().dump();
  text.append(reinterpret_cast<const char*>(bytes), values_.size() * sizeof(double));
  return sha256_hex(text).substr(0, 16);
}

std::size_t PolicyParams::policy_head_offset() const {
  const auto layers = layout(shape_);
  return layers[layers.size() - 2].weights;
}

std::size_t PolicyParams::value_head_offset() const { return layout(shape_).back().weights; }

std::array<double, kNumActions> softmax(std::span<const double, kNumActions> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumActions> p{};
  double sum = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    p[a] = std::exp(logits[a] - mx);
    sum += p[a];
  }
  for (double& v : p) v /= sum;
  return p;
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> input) {
  ForwardCache cache;
  return forward(params, input, cache);
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> input, ForwardCache& cache) {
  const NetworkShape& shape = params.shape();
  if (input.size() != static_cast<std::size_t>(shape.inputs))
    throw ContractError("observation size " + std::to_string(input.size()) +
                        " does not match network input " + std::to_string(shape.inputs));
  const auto layers = layout(shape);
  const double* theta = params.values().data();
  const std::size_t hidden = shape.hidden.size();

  cache.activations.resize(hidden + 1);
  cache.activations[0] = ConstVecMap(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < hidden; ++i) {
    const Layer& l = layers[i];
    ConstMatMap w(theta + l.weights, l.out, l.in);
    ConstVecMap b(theta + l.bias, l.out);
    cache.activations[i + 1] = (w * cache.activations[i] + b).array().tanh().matrix();
  }
  const Eigen::VectorXd& trunk = cache.activations.back();

  PolicyOutput& out = cache.output;
  const Layer& ph = layers[hidden];
  ConstMatMap wp(theta + ph.weights, ph.out, ph.in);
  ConstVecMap bp(theta + ph.bias, ph.out);
  Eigen::Map<Eigen::Matrix<double, kNumActions, 1>> logits(out.logits.data());
  logits = wp * trunk + bp;

  const Layer& vh = layers[hidden + 1];
  ConstMatMap wv(theta + vh.weights, vh.out, vh.in);
  out.value = (wv * trunk)(0) + theta[vh.bias];

  const double mx = logits.maxCoeff();
  double sum = 0.0;
  for (int a = 0; a < kNumActions; ++a) sum += std::exp(out.logits[a] - mx);
  const double log_z = mx + std::log(sum);
  for (int a = 0; a < kNumActions; ++a) {
    out.log_probs[a] = out.logits[a] - log_z;
    out.action_probs[a] = std::exp(out.log_probs[a]);
  }
  return out;
}

void backward(const PolicyParams& params, const ForwardCache& cache,
              std::span<const double, kNumActions> dlogits, double dvalue, std::span<double> grad) {
  if (grad.size() != params.size()) throw ContractError("gradient buffer has wrong size");
  const NetworkShape& shape = params.shape();
  const auto layers = layout(shape);
  const double* theta = params.values().data();
  const std::size_t hidden = shape.hidden.size();
  const Eigen::VectorXd& trunk = cache.activations.back();

  Eigen::Map<const Eigen::Matrix<double, kNumActions, 1>> dl(dlogits.data());
  const Layer& ph = layers[hidden];
  MatMap(grad.data() + ph.weights, ph.out, ph.in).noalias() += dl * trunk.transpose();
  VecMap(grad.data() + ph.bias, ph.out) += dl;
  const Layer& vh = layers[hidden + 1];
  MatMap(grad.data() + vh.weights, vh.out, vh.in).row(0) += dvalue * trunk.transpose();
  grad[vh.bias] += dvalue;

  Eigen::VectorXd delta = ConstMatMap(theta + ph.weights, ph.out, ph.in).transpose() * dl;
  delta += dvalue * ConstMatMap(theta + vh.weights, vh.out, vh.in).row(0).transpose();

  for (std::size_t i = hidden; i-- > 0;) {
    const Layer& l = layers[i];
    const Eigen::VectorXd& h = cache.activations[i + 1];
    const Eigen::VectorXd pre = (delta.array() * (1.0 - h.array().square())).matrix();
    MatMap(grad.data() + l.weights, l.out, l.in).noalias() += pre * cache.activations[i].transpose();
    VecMap(grad.data() + l.bias, l.out) += pre;
    if (i > 0) delta = ConstMatMap(theta + l.weights, l.out, l.in).transpose() * pre;
  }
}

std::array<double, kNumActions> logits_adjoint(const PolicyOutput& out,
                                               std::span<const double, kNumActions> dprobs,
                                               std::span<const double, kNumActions> dlog_probs) {
  // d p_j / d z_k = p_j (delta_jk - p_k);  d log p_j / d z_k = delta_jk - p_k.
  double weighted = 0.0;
  double total_log = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    weighted += dprobs[a] * out.action_probs[a];
    total_log += dlog_probs[a];
  }
  std::array<double, kNumActions> dz{};
  for (int a = 0; a < kNumActions; ++a) {
    const double p = out.action_probs[a];
    dz[a] = p * (dprobs[a] - weighted) + dlog_probs[a] - p * total_log;
  }
  return dz;
}

Action sample_action(std::span<const double, kNumActions> probs, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = 0;
  for (int a = 0; a < kNumActions; ++a) {
    if (probs[a] <= 0.0) continue;
    last_positive = a;
    cumulative += probs[a];
    if (u < cumulative) return static_cast<Action>(a);
  }
  return static_cast<Action>(last_positive);
}

Sample sample(const PolicyParams& params, const Observation& obs, Rng& rng) {
  const PolicyOutput out = forward(params, obs);
  const Action a = sample_action(out.action_probs, rng);
  return {a, out.log_prob(a)};
}

double categorical_kl(std::span<const double, kNumActions> p,
                      std::span<const double, kNumActions> log_p,
                      std::span<const double, kNumActions> log_q) {
  double kl = 0.0;
  for (int a = 0; a < kNumActions; ++a)
    if (p[a] > 0.0) kl += p[a] * (log_p[a] - log_q[a]);
  return kl;
}

double entropy(const PolicyOutput& out) {
  double h = 0.0;
  for (int a = 0; a < kNumActions; ++a)
    if (out.action_probs[a] > 0.0) h -= out.action_probs[a] * out.log_probs[a];
  return h;
}

}  // namespace bxrl::policy
