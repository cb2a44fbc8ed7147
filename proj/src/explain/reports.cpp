#include "bxrl/explain/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace bxrl::explain {

namespace {

std::string row(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

}  // namespace

json to_json(const InfluenceReport& r) {
  json j;
  j["kind"] = "influence";
  j["measure"] = r.measure_name;
  j["snapshot_id"] = r.snapshot_id;
  j["epoch"] = r.epoch;
  j["measure_value"] = r.measure_value;
  j["measure_grad_norm"] = r.measure_grad_norm;
  j["sign"] = "positive scores raise the measure under an SGD step on the record's loss";
  json scores = json::array();
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    scores.push_back({{"record", i}, {"epoch", r.records[i].epoch}, {"t", r.records[i].t}, {"score", r.scores[i]}});
  j["scores"] = std::move(scores);
  return j;
}

std::string to_csv(const InfluenceReport& r) {
  std::string s = "record,epoch,t,score\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    s += std::to_string(i) + "," + std::to_string(r.records[i].epoch) + "," +
         std::to_string(r.records[i].t) + "," + format_double(r.scores[i]) + "\n";
  return s;
}

std::string top_k_table(const InfluenceReport& r, std::size_t k) {
  std::string s = row("%6s %8s %8s %14s\n", "rank", "epoch", "t", "score");
  const auto idx = top_k_by_magnitude(r.scores, k);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t j = idx[i];
    s += row("%6zu %8lld %8lld %14.6e\n", i + 1, static_cast<long long>(r.records[j].epoch),
             static_cast<long long>(r.records[j].t), r.scores[j]);
  }
  return s;
}

json to_json(const ShapleyReport& r) {
  json j;
  j["kind"] = "shapley";
  j["target"] = r.target;
  j["mode"] = r.mode;
  j["v_empty"] = r.v_empty;
  j["v_full"] = r.v_full;
  j["efficiency_gap"] = r.efficiency_gap();
  json phi = json::array();
  for (std::size_t i = 0; i < r.phi.size(); ++i) phi.push_back({{"feature", r.features[i]}, {"phi", r.phi[i]}});
  j["phi"] = std::move(phi);
  return j;
}

std::string to_csv(const ShapleyReport& r) {
  std::string s = "feature,phi\n";
  for (std::size_t i = 0; i < r.phi.size(); ++i) s += r.features[i] + "," + format_double(r.phi[i]) + "\n";
  return s;
}

std::string top_k_table(const ShapleyReport& r, std::size_t k) {
  std::string s = row("%6s %-16s %14s\n", "rank", "feature", "phi");
  const auto idx = top_k_by_magnitude(r.phi, k);
  for (std::size_t i = 0; i < idx.size(); ++i)
    s += row("%6zu %-16s %14.6e\n", i + 1, r.features[idx[i]].c_str(), r.phi[idx[i]]);
  return s;
}

json to_json(const CounterfactualResult& r) {
  json j;
  j["kind"] = "counterfactual";
  j["snapshot_id"] = r.params.id();
  j["initial"] = r.initial;
  j["achieved"] = r.achieved;
  j["target"] = r.target;
  j["kl"] = r.kl;
  j["steps"] = r.steps;
  j["stop_reason"] = r.stop_reason;
  return j;
}

std::string trace_csv(const CounterfactualResult& r) {
  std::string s = "step,segment,objective,measure,kl_pivot,kl_origin,step_size\n";
  for (const TraceEntry& e : r.trace)
    s += std::to_string(e.step) + "," + std::to_string(e.segment) + "," + format_double(e.objective) + "," +
         format_double(e.measure) + "," + format_double(e.kl_pivot) + "," + format_double(e.kl_origin) + "," +
         format_double(e.step_size) + "\n";
  return s;
}

}  // namespace bxrl::explain
