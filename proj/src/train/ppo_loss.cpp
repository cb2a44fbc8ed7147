#include "bxrl/train/ppo_loss.hpp"

#include <algorithm>
#include <cmath>

namespace bxrl::train {
namespace {

constexpr std::size_t kChunk = 32;

void add_parts(LossParts& into, const LossParts& p) {
  into.loss += p.loss;
  into.surrogate += p.surrogate;
  into.value_loss += p.value_loss;
  into.entropy += p.entropy;
  into.clip_fraction += p.clip_fraction;
}

void scale_parts(LossParts& p, double s) {
  p.loss *= s;
  p.surrogate *= s;
  p.value_loss *= s;
  p.entropy *= s;
  p.clip_fraction *= s;
}

}  // namespace

LossParts record_loss_grad(const policy::PolicyParams& params, const TrainingRecord& record,
                           const PpoCoefficients& coefs, std::span<double> grad, double scale) {
  policy::ForwardCache cache;
  const policy::PolicyOutput out = policy::forward(params, record.obs, cache);
  const auto a = static_cast<std::size_t>(action_id(record.action));

  const double ratio = std::exp(out.log_probs[a] - record.log_prob_old);
  const double adv = record.advantage;
  const double unclipped = ratio * adv;
  const double clipped = std::clamp(ratio, 1.0 - coefs.clip_eps, 1.0 + coefs.clip_eps) * adv;
  const bool use_unclipped = unclipped <= clipped;
  const double verr = out.value - record.ret;
  const double h = policy::entropy(out);

  LossParts parts;
  parts.surrogate = use_unclipped ? unclipped : clipped;
  parts.value_loss = verr * verr;
  parts.entropy = h;
  parts.clip_fraction = use_unclipped ? 0.0 : 1.0;
  parts.loss = -parts.surrogate + coefs.value_coef * parts.value_loss - coefs.entropy_coef * h;

  if (!grad.empty()) {
    std::array<double, kNumActions> dprobs{};
    std::array<double, kNumActions> dlog{};
    if (use_unclipped) dlog[a] = -scale * unclipped;
    for (std::size_t k = 0; k < kNumActions; ++k)
      if (out.action_probs[k] > 0.0) dprobs[k] = scale * coefs.entropy_coef * (out.log_probs[k] + 1.0);
    const auto dz = policy::logits_adjoint(out, dprobs, dlog);
    policy::backward(params, cache, dz, scale * 2.0 * coefs.value_coef * verr, grad);
  }
  return parts;
}

BatchLoss minibatch_loss_grad_serial(const policy::PolicyParams& params,
                                     std::span<const TrainingRecord> records,
                                     std::span<const std::size_t> indices,
                                     const PpoCoefficients& coefs) {
  BatchLoss out;
  out.grad.assign(params.size(), 0.0);
  if (indices.empty()) return out;
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i : indices) add_parts(out.parts, record_loss_grad(params, records[i], coefs, out.grad, inv));
  scale_parts(out.parts, inv);
  return out;
}

BatchLoss minibatch_loss_grad(const policy::PolicyParams& params,
                              std::span<const TrainingRecord> records,
                              std::span<const std::size_t> indices, const PpoCoefficients& coefs) {
  BatchLoss out;
  out.grad.assign(params.size(), 0.0);
  if (indices.empty()) return out;
  const double inv = 1.0 / static_cast<double>(indices.size());
  const std::size_t chunks = (indices.size() + kChunk - 1) / kChunk;
  std::vector<policy::GradVector> grads(chunks, policy::GradVector(params.size(), 0.0));
  std::vector<LossParts> parts(chunks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const std::size_t end = std::min(indices.size(), (cu + 1) * kChunk);
    for (std::size_t k = cu * kChunk; k < end; ++k)
      add_parts(parts[cu], record_loss_grad(params, records[indices[k]], coefs, grads[cu], inv));
  }

  for (std::size_t c = 0; c < chunks; ++c) {
    add_parts(out.parts, parts[c]);
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += grads[c][j];
  }
  scale_parts(out.parts, inv);
  return out;
}

policy::GradVector record_gradient(const policy::PolicyParams& params, const TrainingRecord& record,
                                   const PpoCoefficients& coefs) {
  policy::GradVector g(params.size(), 0.0);
  record_loss_grad(params, record, coefs, g);
  return g;
}

}  // namespace bxrl::train
