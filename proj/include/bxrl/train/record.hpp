#pragma once

#include <cstdint>

#include "bxrl/common/types.hpp"

namespace bxrl::train {

// One buffered transition. `advantage` is the batch-normalised advantage the
// loss uses; `ret` is the value target (raw advantage + value_old).
struct TrainingRecord {
  Observation obs{};
  Action action = Action::Idle;
  double reward = 0.0;
  double log_prob_old = 0.0;
  double value_old = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
  std::int64_t epoch = 0;
  std::int64_t t = 0;

  bool operator==(const TrainingRecord&) const = default;
};

}  // namespace bxrl::train
