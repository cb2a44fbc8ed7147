#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bxrl/policy/network.hpp"

namespace bxrl::policy {

// Checkpoint file
// ---------------
// Binary, little-endian:
//   8 bytes  magic "BXRLCKPT"
//   u32      format version (1)
//   str      shape descriptor as compact JSON (u32 length + bytes)
//   u64      seed
//   i64      training step (timesteps consumed)
//   i64      epoch (0 before the first update)
//   u64      parameter count
//   f64[]    parameters in the flat layout of NetworkShape
// A sidecar "<file>.json" repeats the metadata with the checkpoint id and the
// SHA-256 of the binary file.

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::int64_t epoch = 0;  // 0 for the initial checkpoint

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  PolicyParams params;
  CheckpointMeta meta;
};

std::vector<std::uint8_t> encode_checkpoint(const PolicyParams& params, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

// Writes the binary file and its sidecar.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     const CheckpointMeta& meta);
// Throws LookupError if missing, FormatError if corrupt.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bxrl::policy
