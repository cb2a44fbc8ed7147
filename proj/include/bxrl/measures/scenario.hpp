#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bxrl/common/json_io.hpp"
#include "bxrl/common/types.hpp"
#include "bxrl/env/rollout_archive.hpp"

namespace bxrl::measures {

// Scenario file
// -------------
//   {"schema_version": 1,
//    "name": str,
//    "entries": [{"obs": [25 numbers, row-major], "action": "LEFT" | ...,
//                 "weight": number,
//                 "provenance": {"epoch": int, "t": int}}   (optional)
//               ...],
//    "provenance": {...}}                                    (free-form object)

inline constexpr int kScenarioSchemaVersion = 1;

struct EntryProvenance {
  std::int64_t epoch = 0;
  std::int64_t t = 0;

  bool operator==(const EntryProvenance&) const = default;
};

struct ScenarioEntry {
  Observation obs{};
  Action action = Action::Idle;
  double weight = 0.0;
  std::optional<EntryProvenance> provenance;

  bool operator==(const ScenarioEntry&) const = default;
};

struct ScenarioSet {
  std::string name;
  std::vector<ScenarioEntry> entries;
  json provenance = json::object();

  // Non-empty, weights positive and summing to 1 within 1e-9, observations
  // finite with entries in [-1, 1] and presence flags in {0, 1}.
  // Throws ContractError.
  void validate() const;

  bool operator==(const ScenarioSet&) const = default;
};

json scenario_to_json(const ScenarioSet& set);
// Throws FormatError on schema problems, ContractError on invalid content.
ScenarioSet scenario_from_json(const json& j);

ScenarioSet load_scenarios(const std::filesystem::path& path);
void save_scenarios(const std::filesystem::path& path, const ScenarioSet& set);

struct Selection {
  std::int64_t epoch = 0;
  std::int64_t t = 0;
  Action action = Action::Idle;
};

// Uniformly weighted set from archive records. Missing (epoch, t) throws
// LookupError, a repeated (epoch, t) throws DuplicateError.
ScenarioSet build_from_rollouts(const env::RolloutArchive& archive,
                                const std::vector<Selection>& selections,
                                const std::string& name, const std::string& source = "");

}  // namespace bxrl::measures
