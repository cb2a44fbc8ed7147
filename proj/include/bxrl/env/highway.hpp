#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "bxrl/common/json_io.hpp"
#include "bxrl/common/rng.hpp"
#include "bxrl/common/types.hpp"
#include "bxrl/env/driver_models.hpp"
#include "bxrl/env/geometry.hpp"

namespace bxrl::env {

inline constexpr std::array<double, 3> kTargetSpeeds = {20.0, 25.0, 30.0};

struct EgoControl {
  int target_lane = 0;
  double target_speed = 25.0;  // always one of kTargetSpeeds

  bool operator==(const EgoControl&) const = default;
};

struct ControllerGains {
  double speed = 1.0 / 0.6;           // s^-1
  double lateral = 1.0 / 3.0;         // s^-1, lane offset -> lateral speed
  double heading = 1.0 / 0.25;        // s^-1, heading error -> heading rate
  double max_steering = std::numbers::pi / 4.0;
};

struct EnvConfig {
  int lanes = 4;
  double lane_width = 4.0;
  double vehicle_length = 5.0;
  double vehicle_width = 2.0;
  int npc_count = 50;
  int horizon = 80;            // outer steps per episode
  int substeps = 15;           // controller updates per outer step
  double step_seconds = 1.0;
  double ego_initial_speed = 25.0;
  double npc_speed_min = 21.0;
  double npc_speed_max = 26.0;
  double spawn_spacing = 25.0;  // mean longitudinal gap between consecutive NPCs
  double spawn_jitter = 0.3;    // spacing = spawn_spacing * exp(U(-j, j))
  double param_jitter = 0.15;   // NPC parameters scaled by U(1-j, 1+j)
  NpcParams npc_defaults;
  ControllerGains gains;
  // Observation normalisation: value / range, clipped to [-1, 1].
  double obs_x_range = 100.0;
  double obs_y_range = 16.0;
  double obs_v_range = 80.0;
  double sensing_range = 100.0;  // NPCs further ahead are not observed
  double sensing_behind = 5.0;   // NPCs up to this far behind still count as ahead

  void validate() const;
  json to_json() const;
  static EnvConfig from_json(const json& j);
  // Short hash of the canonical JSON form, recorded in archive headers.
  std::string hash() const;
};

struct Npc {
  VehicleState vehicle;
  NpcParams params;
  int target_lane = 0;

  bool operator==(const Npc&) const = default;
};

struct EnvState {
  VehicleState ego;
  EgoControl ego_control;
  std::vector<Npc> npcs;
  int t = 0;
  Rng rng;
  bool collided = false;

  bool operator==(const EnvState&) const = default;
};

struct RewardBreakdown {
  double collision_term = 0.0;  // -1 or 0
  double speed_term = 0.0;      // 0.4 * clip((v - 20) / 10, 0, 1)
  double lane_term = 0.0;       // 0.1 * lane / (lanes - 1)
  double total = 0.0;
  double normalized = 0.0;      // (total + 1) / 1.5

  bool operator==(const RewardBreakdown&) const = default;
};

struct StepResult {
  EnvState state;
  Observation observation{};
  RewardBreakdown reward;
  bool done = false;
};

// LEFT/RIGHT move the target lane (clamped), FASTER/SLOWER step the target
// speed through {20, 25, 30} (saturating), IDLE keeps both.
EgoControl apply_action(const EgoControl& control, Action action, int lanes = 4);

RewardBreakdown compute_reward(const VehicleState& ego, bool collided, const EnvConfig& config);

class HighwayEnv {
 public:
  explicit HighwayEnv(EnvConfig config = {});

  const EnvConfig& config() const { return config_; }

  struct ResetResult {
    EnvState state;
    Observation observation{};
  };
  ResetResult reset(std::uint64_t seed) const;

  StepResult step(const EnvState& state, Action action) const;
  // In-place variant used by the rollout kernels.
  RewardBreakdown step_inplace(EnvState& state, Action action, bool& done) const;

  Observation observe(const EnvState& state) const;

  double lane_center(int lane) const { return lane * config_.lane_width; }
  int nearest_lane(double y) const;
  bool is_terminal(const EnvState& state) const;

 private:
  void substep(EnvState& state, double dt) const;
  void update_npc_lane_targets(EnvState& state) const;
  double steering_command(const VehicleState& v, int target_lane) const;

  EnvConfig config_;
};

}  // namespace bxrl::env
