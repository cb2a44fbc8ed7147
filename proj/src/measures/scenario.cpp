#include "bxrl/measures/scenario.hpp"

#include <cmath>
#include <set>
#include <utility>

#include "bxrl/common/errors.hpp"

namespace bxrl::measures {

void ScenarioSet::validate() const {
  if (entries.empty()) throw ContractError("scenario set '" + name + "' is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ScenarioEntry& e = entries[i];
    const std::string where = "scenario set '" + name + "' entry " + std::to_string(i);
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw ContractError(where + ": weight must be positive");
    total += e.weight;
    for (double v : e.obs)
      if (!std::isfinite(v) || v < -1.0 || v > 1.0)
        throw ContractError(where + ": observation entries must lie in [-1, 1]");
    for (int r = 0; r < kObsRows; ++r) {
      const double p = e.obs[obs_index(r, 0)];
      if (p != 0.0 && p != 1.0) throw ContractError(where + ": presence must be 0 or 1");
    }
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ContractError("scenario set '" + name + "': weights sum to " + format_double(total));
}

json scenario_to_json(const ScenarioSet& set) {
  json entries = json::array();
  for (const ScenarioEntry& e : set.entries) {
    json obs = json::array();
    for (double v : e.obs) obs.push_back(v);
    json j{{"obs", std::move(obs)}, {"action", action_name(e.action)}, {"weight", e.weight}};
    if (e.provenance) j["provenance"] = {{"epoch", e.provenance->epoch}, {"t", e.provenance->t}};
    entries.push_back(std::move(j));
  }
  return json{{"schema_version", kScenarioSchemaVersion},
              {"name", set.name},
              {"entries", std::move(entries)},
              {"provenance", set.provenance}};
}

ScenarioSet scenario_from_json(const json& j) {
  ScenarioSet set;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kScenarioSchemaVersion)
      throw FormatError("unsupported scenario schema_version " + std::to_string(version));
    set.name = j.at("name").get<std::string>();
    if (j.contains("provenance")) set.provenance = j.at("provenance");
    for (const json& e : j.at("entries")) {
      ScenarioEntry entry;
      const json& obs = e.at("obs");
      if (!obs.is_array() || obs.size() != kObsSize)
        throw FormatError("scenario entry obs must have 25 numbers");
      for (std::size_t i = 0; i < kObsSize; ++i) entry.obs[i] = obs[i].get<double>();
      const std::string name = e.at("action").get<std::string>();
      const auto action = parse_action(name);
      if (!action) throw FormatError("unknown action '" + name + "'");
      entry.action = *action;
      entry.weight = e.at("weight").get<double>();
      if (e.contains("provenance"))
        entry.provenance = EntryProvenance{e["provenance"].at("epoch").get<std::int64_t>(),
                                           e["provenance"].at("t").get<std::int64_t>()};
      set.entries.push_back(entry);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("scenario file: ") + e.what());
  }
  set.validate();
  return set;
}

ScenarioSet load_scenarios(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path));
}

void save_scenarios(const std::filesystem::path& path, const ScenarioSet& set) {
  set.validate();
  write_json_file(path, scenario_to_json(set));
}

ScenarioSet build_from_rollouts(const env::RolloutArchive& archive,
                                const std::vector<Selection>& selections,
                                const std::string& name, const std::string& source) {
  if (selections.empty()) throw ContractError("no selections");
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  ScenarioSet set;
  set.name = name;
  set.provenance = {{"source", source},
                    {"checkpoint_id", archive.header.checkpoint_id},
                    {"config_hash", archive.header.config_hash}};
  const double w = 1.0 / static_cast<double>(selections.size());
  for (const Selection& s : selections) {
    if (!seen.emplace(s.epoch, s.t).second)
      throw DuplicateError("duplicate selection (epoch=" + std::to_string(s.epoch) +
                           ", t=" + std::to_string(s.t) + ")");
    const env::RolloutRecord& r = archive.at(s.epoch, s.t);
    set.entries.push_back({r.obs, s.action, w, EntryProvenance{s.epoch, s.t}});
  }
  set.validate();
  return set;
}

}  // namespace bxrl::measures
