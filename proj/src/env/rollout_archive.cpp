#include "bxrl/env/rollout_archive.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <utility>

#include "bxrl/common/binary_io.hpp"
#include "bxrl/common/errors.hpp"

namespace bxrl::env {
namespace {

constexpr const char* kFormat = "bxrl-rollout";
constexpr int kVersion = 1;
constexpr std::string_view kBinaryMagic = "BXRLROL1";

json header_json(const RolloutHeader& h) {
  return json{{"type", "header"},
              {"format", kFormat},
              {"version", kVersion},
              {"config_hash", h.config_hash},
              {"seed", h.seed},
              {"checkpoint_id", h.checkpoint_id}};
}

RolloutHeader parse_header(const json& j) {
  if (!j.is_object() || j.value("type", "") != "header" || j.value("format", "") != kFormat)
    throw FormatError("rollout archive: missing header line");
  if (j.value("version", 0) != kVersion)
    throw FormatError("rollout archive: unsupported version " + j.at("version").dump());
  RolloutHeader h;
  h.config_hash = j.at("config_hash").get<std::string>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  return h;
}

json record_json(const RolloutRecord& r) {
  json obs = json::array();
  for (double v : r.obs) obs.push_back(v);
  return json{{"epoch", r.epoch},
              {"t", r.t},
              {"obs", std::move(obs)},
              {"action", action_id(r.action)},
              {"reward",
               {{"collision", r.reward.collision_term},
                {"speed", r.reward.speed_term},
                {"lane", r.reward.lane_term},
                {"total", r.reward.total},
                {"normalized", r.reward.normalized}}},
              {"done", r.done}};
}

RolloutRecord parse_record(const json& j) {
  RolloutRecord r;
  r.epoch = j.at("epoch").get<std::int64_t>();
  r.t = j.at("t").get<std::int64_t>();
  const json& obs = j.at("obs");
  if (!obs.is_array() || obs.size() != kObsSize)
    throw FormatError("observation must have 25 entries");
  for (std::size_t i = 0; i < kObsSize; ++i) r.obs[i] = obs[i].get<double>();
  r.action = action_from_id(j.at("action").get<int>());
  const json& rw = j.at("reward");
  r.reward.collision_term = rw.at("collision").get<double>();
  r.reward.speed_term = rw.at("speed").get<double>();
  r.reward.lane_term = rw.at("lane").get<double>();
  r.reward.total = rw.at("total").get<double>();
  r.reward.normalized = rw.at("normalized").get<double>();
  r.done = j.at("done").get<bool>();
  return r;
}

}  // namespace

const RolloutRecord& RolloutArchive::at(std::int64_t epoch, std::int64_t t) const {
  for (const RolloutRecord& r : records)
    if (r.epoch == epoch && r.t == t) return r;
  throw LookupError("no rollout record at (epoch=" + std::to_string(epoch) +
                    ", t=" + std::to_string(t) + ")");
}

void RolloutArchive::validate_unique() const {
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (const RolloutRecord& r : records)
    if (!seen.emplace(r.epoch, r.t).second)
      throw DuplicateError("duplicate rollout record (epoch=" + std::to_string(r.epoch) +
                           ", t=" + std::to_string(r.t) + ")");
}

std::string to_jsonl(const RolloutArchive& archive) {
  std::string out = header_json(archive.header).dump();
  out.push_back('\n');
  for (const RolloutRecord& r : archive.records) {
    out += record_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

RolloutArchive parse_jsonl(const std::string& text) {
  RolloutArchive archive;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        archive.header = parse_header(j);
        have_header = true;
      } else {
        archive.records.push_back(parse_record(j));
      }
    } catch (const std::exception& e) {
      const std::string where =
          have_header ? "record " + std::to_string(archive.records.size()) : "header";
      throw FormatError("rollout archive: corrupt " + where + " (line " +
                        std::to_string(line_no) + "): " + e.what());
    }
  }
  if (!have_header) throw FormatError("rollout archive: empty file");
  return archive;
}

std::vector<std::uint8_t> to_binary(const RolloutArchive& archive) {
  ByteWriter w;
  w.raw(kBinaryMagic);
  w.u32(kVersion);
  w.str(header_json(archive.header).dump());
  w.u64(archive.records.size());
  for (const RolloutRecord& r : archive.records) {
    w.i64(r.epoch);
    w.i64(r.t);
    for (double v : r.obs) w.f64(v);
    w.u32(static_cast<std::uint32_t>(action_id(r.action)));
    w.f64(r.reward.collision_term);
    w.f64(r.reward.speed_term);
    w.f64(r.reward.lane_term);
    w.f64(r.reward.total);
    w.f64(r.reward.normalized);
    w.u8(r.done ? 1 : 0);
  }
  return w.take();
}

RolloutArchive parse_binary(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.raw(kBinaryMagic.size()) != kBinaryMagic)
    throw FormatError("rollout archive: bad binary magic");
  if (r.u32() != static_cast<std::uint32_t>(kVersion))
    throw FormatError("rollout archive: unsupported binary version");
  RolloutArchive archive;
  archive.header = parse_header(json::parse(r.str()));
  const std::uint64_t count = r.u64();
  archive.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    try {
      RolloutRecord rec;
      rec.epoch = r.i64();
      rec.t = r.i64();
      for (double& v : rec.obs) v = r.f64();
      rec.action = action_from_id(static_cast<int>(r.u32()));
      rec.reward.collision_term = r.f64();
      rec.reward.speed_term = r.f64();
      rec.reward.lane_term = r.f64();
      rec.reward.total = r.f64();
      rec.reward.normalized = r.f64();
      rec.done = r.u8() != 0;
      archive.records.push_back(rec);
    } catch (const std::exception& e) {
      throw FormatError("rollout archive: corrupt record " + std::to_string(i) + ": " + e.what());
    }
  }
  return archive;
}

void save_archive(const std::filesystem::path& path, const RolloutArchive& archive) {
  if (path.extension() == ".bin") {
    const auto bytes = to_binary(archive);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    write_text_file(path, to_jsonl(archive));
  }
}

RolloutArchive load_archive(const std::filesystem::path& path) {
  if (path.extension() == ".bin") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LookupError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_binary(bytes);
  }
  return parse_jsonl(read_text_file(path));
}

}  // namespace bxrl::env
