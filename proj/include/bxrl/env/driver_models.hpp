#pragma once

#include <optional>

#include "bxrl/env/geometry.hpp"

namespace bxrl::env {

// Intelligent Driver Model parameters.
struct IdmParams {
  double desired_speed = 25.0;   // v0, m/s
  double time_headway = 1.5;     // T, s
  double min_gap = 10.0;         // s0, m
  double max_accel = 3.0;        // a_max, m/s^2
  double comfort_decel = 5.0;    // b, m/s^2
  double exponent = 4.0;         // delta
  double hard_brake = 9.0;       // output clipped to [-hard_brake, max_accel]

  bool operator==(const IdmParams&) const = default;
};

struct MobilParams {
  double politeness = 0.1;
  double accel_threshold = 0.2;  // m/s^2
  double safe_braking = 2.0;     // m/s^2, braking the new follower may be forced into

  bool operator==(const MobilParams&) const = default;
};

struct NpcParams {
  IdmParams idm;
  MobilParams mobil;

  bool operator==(const NpcParams&) const = default;
};

// Bumper-to-bumper gap from `follower` to `leader`.
double bumper_gap(const VehicleState& follower, const VehicleState& leader);

// a = a_max [1 - (v/v0)^delta - (s*/s)^2],
// s* = s0 + max(0, vT + v dv / (2 sqrt(a_max b))).
// A non-positive gap yields -hard_brake.
double idm_acceleration(const VehicleState& follower, const VehicleState* leader,
                        const IdmParams& p);

struct LaneNeighbors {
  const VehicleState* leader = nullptr;
  const VehicleState* follower = nullptr;
};

// Vehicles around a deciding vehicle. `left` / `right` are empty when no lane
// exists on that side.
struct MobilNeighbors {
  LaneNeighbors current;
  std::optional<LaneNeighbors> left;
  std::optional<LaneNeighbors> right;
};

enum class LaneChange { Keep, Left, Right };

// Incentive of moving into the lane described by `target`; nullopt when the
// safety criterion vetoes the move. Follower accelerations are predicted with
// the deciding vehicle's IDM parameters.
std::optional<double> mobil_incentive(const VehicleState& vehicle,
                                      const LaneNeighbors& current,
                                      const LaneNeighbors& target,
                                      const NpcParams& p);

// Picks the side with the largest incentive strictly above the threshold;
// equal incentives prefer the left side, and anything not above the
// threshold keeps the lane.
LaneChange mobil_decision(const VehicleState& vehicle, const MobilNeighbors& neighbors,
                          const NpcParams& p);

}  // namespace bxrl::env
