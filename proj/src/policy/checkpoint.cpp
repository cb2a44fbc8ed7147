#include "bxrl/policy/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "bxrl/common/binary_io.hpp"
#include "bxrl/common/errors.hpp"
#include "bxrl/common/hashing.hpp"

namespace bxrl::policy {
namespace {

constexpr std::string_view kMagic = "BXRLCKPT";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const PolicyParams& params, const CheckpointMeta& meta) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.str(params.shape().to_json().dump());
  w.u64(meta.seed);
  w.i64(meta.step);
  w.i64(meta.epoch);
  w.u64(params.size());
  for (double v : params.values()) w.f64(v);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  try {
    ByteReader r(bytes);
    if (r.raw(kMagic.size()) != kMagic) throw FormatError("bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version));
    const NetworkShape shape = NetworkShape::from_json(json::parse(r.str()));
    Checkpoint ck;
    ck.meta.seed = r.u64();
    ck.meta.step = r.i64();
    ck.meta.epoch = r.i64();
    const std::uint64_t count = r.u64();
    if (count != shape.param_count()) throw FormatError("parameter count does not match shape");
    std::vector<double> values(count);
    for (double& v : values) v = r.f64();
    if (!r.at_end()) throw FormatError("trailing bytes");
    ck.params = PolicyParams(shape, std::move(values));
    return ck;
  } catch (const FormatError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint: corrupt content: ") + e.what());
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     const CheckpointMeta& meta) {
  const auto bytes = encode_checkpoint(params, meta);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  json side{{"format", "bxrl-checkpoint"},
            {"version", kVersion},
            {"id", params.id()},
            {"shape", params.shape().to_json()},
            {"param_count", params.size()},
            {"seed", meta.seed},
            {"step", meta.step},
            {"epoch", meta.epoch},
            {"sha256", sha256_hex(std::span<const std::uint8_t>(bytes))}};
  write_json_file(sidecar_path(path), side);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("checkpoint not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace bxrl::policy
