#include "bxrl/train/records.hpp"

#include <zlib.h>

#include "bxrl/common/binary_io.hpp"
#include "bxrl/common/errors.hpp"
#include "bxrl/common/json_io.hpp"

namespace bxrl::train {
namespace {

constexpr std::string_view kMagic = "BXRLREC1";

}  // namespace

void save_records(const std::filesystem::path& path, const RecordDump& dump) {
  ByteWriter w;
  w.raw(kMagic);
  const json header{{"epoch", dump.epoch},
                    {"checkpoint_id", dump.checkpoint_id},
                    {"clip_eps", dump.coefs.clip_eps},
                    {"value_coef", dump.coefs.value_coef},
                    {"entropy_coef", dump.coefs.entropy_coef},
                    {"count", dump.records.size()}};
  w.str(header.dump());
  for (const TrainingRecord& r : dump.records) {
    for (double v : r.obs) w.f64(v);
    w.u32(static_cast<std::uint32_t>(action_id(r.action)));
    w.f64(r.reward);
    w.f64(r.log_prob_old);
    w.f64(r.value_old);
    w.f64(r.advantage);
    w.f64(r.ret);
    w.i64(r.epoch);
    w.i64(r.t);
  }
  const auto& bytes = w.bytes();
  gzFile f = gzopen(path.string().c_str(), "wb6");
  if (f == nullptr) throw ConfigError("cannot write " + path.string());
  const int written = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  const int closed = gzclose(f);
  if (written != static_cast<int>(bytes.size()) || closed != Z_OK)
    throw ConfigError("failed writing " + path.string());
}

RecordDump load_records(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw LookupError("record dump not found: " + path.string());
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw LookupError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::array<std::uint8_t, 1 << 16> buf{};
  int n = 0;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0)
    bytes.insert(bytes.end(), buf.begin(), buf.begin() + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError(path.string() + ": corrupt compressed stream");

  RecordDump dump;
  try {
    ByteReader r(bytes);
    if (r.raw(kMagic.size()) != kMagic) throw FormatError("bad magic");
    const json h = json::parse(r.str());
    dump.epoch = h.at("epoch").get<std::int64_t>();
    dump.checkpoint_id = h.at("checkpoint_id").get<std::string>();
    dump.coefs.clip_eps = h.at("clip_eps").get<double>();
    dump.coefs.value_coef = h.at("value_coef").get<double>();
    dump.coefs.entropy_coef = h.at("entropy_coef").get<double>();
    const auto count = h.at("count").get<std::size_t>();
    dump.records.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      TrainingRecord& rec = dump.records[i];
      try {
        for (double& v : rec.obs) v = r.f64();
        rec.action = action_from_id(static_cast<int>(r.u32()));
        rec.reward = r.f64();
        rec.log_prob_old = r.f64();
        rec.value_old = r.f64();
        rec.advantage = r.f64();
        rec.ret = r.f64();
        rec.epoch = r.i64();
        rec.t = r.i64();
      } catch (const std::exception& e) {
        throw FormatError("record " + std::to_string(i) + ": " + e.what());
      }
    }
    if (!r.at_end()) throw FormatError("trailing bytes");
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": corrupt header: " + e.what());
  }
  return dump;
}

}  // namespace bxrl::train
