#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bxrl/measures/measure.hpp"
#include "bxrl/train/records.hpp"

namespace bxrl::explain {

// Identifies a training record within its epoch dump.
struct RecordId {
  std::int64_t epoch = 0;
  std::int64_t t = 0;
  bool operator==(const RecordId&) const = default;
};

// Per-record scores I_i = <grad m(theta), grad J_i(theta)> where J_i is the
// PPO objective of record i (the negated loss). A plain SGD step of size eta
// on record i's loss changes m by eta * I_i to first order, so positive
// scores mark records whose update raised the measure.
struct InfluenceReport {
  std::string measure_name;
  std::string snapshot_id;
  std::int64_t epoch = 0;
  double measure_value = 0.0;
  double measure_grad_norm = 0.0;
  std::vector<RecordId> records;
  std::vector<double> scores;
};

// Throws ProvenanceError unless params.id() matches the dump's checkpoint id.
InfluenceReport influence(const train::RecordDump& dump, const measures::BehaviorMeasure& measure,
                          const policy::PolicyParams& params);
InfluenceReport influence_serial(const train::RecordDump& dump,
                                 const measures::BehaviorMeasure& measure,
                                 const policy::PolicyParams& params);

// Indices of the k largest |score| entries, ties broken by index.
std::vector<std::size_t> top_k_by_magnitude(const std::vector<double>& scores, std::size_t k);

}  // namespace bxrl::explain
