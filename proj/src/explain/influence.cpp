#include "bxrl/explain/influence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bxrl/common/errors.hpp"

namespace bxrl::explain {

namespace {

double dot(const policy::GradVector& a, const policy::GradVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

InfluenceReport prepare(const train::RecordDump& dump, const measures::BehaviorMeasure& measure,
                        const policy::PolicyParams& params, policy::GradVector& mgrad) {
  if (params.id() != dump.checkpoint_id)
    throw ProvenanceError("records of epoch " + std::to_string(dump.epoch) +
                          " were collected under snapshot " + dump.checkpoint_id +
                          ", not " + params.id());
  InfluenceReport r;
  r.measure_name = measure.name();
  r.snapshot_id = params.id();
  r.epoch = dump.epoch;
  r.measure_value = measure.value_and_gradient(params, mgrad);
  r.measure_grad_norm = std::sqrt(dot(mgrad, mgrad));
  r.records.reserve(dump.records.size());
  for (const train::TrainingRecord& rec : dump.records) r.records.push_back({rec.epoch, rec.t});
  r.scores.assign(dump.records.size(), 0.0);
  return r;
}

double score(const policy::PolicyParams& params, const train::TrainingRecord& rec,
             const train::PpoCoefficients& coefs, const policy::GradVector& mgrad) {
  const double s = -dot(mgrad, train::record_gradient(params, rec, coefs));
  if (!std::isfinite(s)) throw DivergenceError("non-finite influence score at t=" + std::to_string(rec.t));
  return s;
}

}  // namespace

InfluenceReport influence(const train::RecordDump& dump, const measures::BehaviorMeasure& measure,
                          const policy::PolicyParams& params) {
  policy::GradVector mgrad;
  InfluenceReport r = prepare(dump, measure, params, mgrad);
  if (r.measure_grad_norm == 0.0) return r;
  const auto n = static_cast<std::ptrdiff_t>(dump.records.size());
  std::vector<std::string> errors(dump.records.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      r.scores[k] = score(params, dump.records[k], dump.coefs, mgrad);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw DivergenceError(e);
  return r;
}

InfluenceReport influence_serial(const train::RecordDump& dump,
                                 const measures::BehaviorMeasure& measure,
                                 const policy::PolicyParams& params) {
  policy::GradVector mgrad;
  InfluenceReport r = prepare(dump, measure, params, mgrad);
  if (r.measure_grad_norm == 0.0) return r;
  for (std::size_t i = 0; i < dump.records.size(); ++i)
    r.scores[i] = score(params, dump.records[i], dump.coefs, mgrad);
  return r;
}

std::vector<std::size_t> top_k_by_magnitude(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double x = std::abs(scores[a]), y = std::abs(scores[b]);
                      return x != y ? x > y : a < b;
                    });
  idx.resize(k);
  return idx;
}

}  // namespace bxrl::explain
