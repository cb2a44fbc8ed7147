#pragma once

namespace bxrl::env {

// Kinematic record of one vehicle. Positions are road coordinates: x along
// the road, y across it (lane 0 at y = 0, increasing to the right).
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double length = 5.0;
  double width = 2.0;
  int lane_index = 0;
  bool alive = true;

  bool operator==(const VehicleState&) const = default;
};

// Separating-axis test on the two oriented rectangles (length x width,
// centred on (x, y), rotated by heading). Touching edges count as overlap.
bool sat_overlap(const VehicleState& a, const VehicleState& b);

// Cheap necessary condition for overlap (bounding circles).
bool may_overlap(const VehicleState& a, const VehicleState& b);

}  // namespace bxrl::env
