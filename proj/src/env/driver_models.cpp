#include "bxrl/env/driver_models.hpp"

#include <algorithm>
#include <cmath>

namespace bxrl::env {

double bumper_gap(const VehicleState& follower, const VehicleState& leader) {
  return leader.x - follower.x - 0.5 * (leader.length + follower.length);
}

double idm_acceleration(const VehicleState& follower, const VehicleState* leader,
                        const IdmParams& p) {
  const double v = std::max(follower.speed, 0.0);
  double accel = p.max_accel * (1.0 - std::pow(v / p.desired_speed, p.exponent));
  if (leader != nullptr) {
    const double gap = bumper_gap(follower, *leader);
    if (!(gap > 0.0)) return -p.hard_brake;
    const double dv = v - leader->speed;
    const double dynamic =
        v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
    const double desired_gap = p.min_gap + std::max(0.0, dynamic);
    const double ratio = desired_gap / gap;
    accel -= p.max_accel * ratio * ratio;
  }
  return std::clamp(accel, -p.hard_brake, p.max_accel);
}

std::optional<double> mobil_incentive(const VehicleState& vehicle,
                                      const LaneNeighbors& current,
                                      const LaneNeighbors& target,
                                      const NpcParams& p) {
  const IdmParams& idm = p.idm;

  // Safety: the new follower must not be forced to brake harder than allowed.
  double new_follower_gain = 0.0;
  if (target.follower != nullptr) {
    const double after = idm_acceleration(*target.follower, &vehicle, idm);
    if (after < -p.mobil.safe_braking) return std::nullopt;
    const double before = idm_acceleration(*target.follower, target.leader, idm);
    new_follower_gain = after - before;
  }

  const double own_before = idm_acceleration(vehicle, current.leader, idm);
  const double own_after = idm_acceleration(vehicle, target.leader, idm);

  double old_follower_gain = 0.0;
  if (current.follower != nullptr) {
    const double before = idm_acceleration(*current.follower, &vehicle, idm);
    const double after = idm_acceleration(*current.follower, current.leader, idm);
    old_follower_gain = after - before;
  }

  return (own_after - own_before) +
         p.mobil.politeness * (new_follower_gain + old_follower_gain);
}

LaneChange mobil_decision(const VehicleState& vehicle, const MobilNeighbors& neighbors,
                          const NpcParams& p) {
  LaneChange best = LaneChange::Keep;
  double best_incentive = p.mobil.accel_threshold;
  auto consider = [&](const std::optional<LaneNeighbors>& side, LaneChange choice) {
    if (!side) return;
    const auto incentive = mobil_incentive(vehicle, neighbors.current, *side, p);
    if (incentive && *incentive > best_incentive) {
      best_incentive = *incentive;
      best = choice;
    }
  };
  consider(neighbors.left, LaneChange::Left);
  consider(neighbors.right, LaneChange::Right);
  return best;
}

}  // namespace bxrl::env
