#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bxrl/train/ppo_loss.hpp"
#include "bxrl/train/record.hpp"

namespace bxrl::train {

// Record dump: gzip stream holding magic "BXRLREC1", a length-prefixed JSON
// header {"epoch", "checkpoint_id", "clip_eps", "value_coef", "entropy_coef",
// "count"}, then per record 25 x f64 obs, u32 action, f64 reward,
// log_prob_old, value_old, advantage, ret, i64 epoch, i64 t (little-endian).
// checkpoint_id names the parameters the records were collected under.
struct RecordDump {
  std::int64_t epoch = 0;
  std::string checkpoint_id;
  PpoCoefficients coefs;
  std::vector<TrainingRecord> records;

  bool operator==(const RecordDump&) const = default;
};

void save_records(const std::filesystem::path& path, const RecordDump& dump);
// Throws LookupError if missing, FormatError if corrupt.
RecordDump load_records(const std::filesystem::path& path);

}  // namespace bxrl::train
