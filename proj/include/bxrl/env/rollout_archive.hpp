#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bxrl/common/json_io.hpp"
#include "bxrl/common/types.hpp"
#include "bxrl/env/highway.hpp"

namespace bxrl::env {

// Rollout archive
// ---------------
// Line-delimited JSON. The first line is the header object
//   {"type":"header","format":"bxrl-rollout","version":1,
//    "config_hash":str,"seed":uint,"checkpoint_id":str}
// and every following line is one timestep, with fields in this order:
//   {"epoch":int,"t":int,"obs":[25 numbers, row-major],"action":int,
//    "reward":{"collision":n,"speed":n,"lane":n,"total":n,"normalized":n},
//    "done":bool}
// Numbers are written in shortest round-trip form. (epoch, t) is unique.
//
// The binary variant holds the same content: magic "BXRLROL1", u32 version,
// header JSON as a length-prefixed string, u64 record count, then per record
// i64 epoch, i64 t, 25 x f64 obs, u32 action, 5 x f64 reward, u8 done. All
// integers and IEEE-754 doubles are little-endian.

struct RolloutHeader {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string checkpoint_id;

  bool operator==(const RolloutHeader&) const = default;
};

struct RolloutRecord {
  std::int64_t epoch = 0;
  std::int64_t t = 0;
  Observation obs{};
  Action action = Action::Idle;
  RewardBreakdown reward;
  bool done = false;

  bool operator==(const RolloutRecord&) const = default;
};

struct RolloutArchive {
  RolloutHeader header;
  std::vector<RolloutRecord> records;

  // Throws LookupError naming the index when absent.
  const RolloutRecord& at(std::int64_t epoch, std::int64_t t) const;
  // Throws DuplicateError when (epoch, t) repeats.
  void validate_unique() const;

  bool operator==(const RolloutArchive&) const = default;
};

std::string to_jsonl(const RolloutArchive& archive);
RolloutArchive parse_jsonl(const std::string& text);
std::vector<std::uint8_t> to_binary(const RolloutArchive& archive);
RolloutArchive parse_binary(const std::vector<std::uint8_t>& bytes);

// Format chosen by the ".bin" extension; anything else is JSON lines.
void save_archive(const std::filesystem::path& path, const RolloutArchive& archive);
RolloutArchive load_archive(const std::filesystem::path& path);

}  // namespace bxrl::env
