#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "bxrl/env/geometry.hpp"

namespace bxrl::testing {

using env::VehicleState;

inline VehicleState car(double x, double y, double heading = 0.0, double speed = 25.0) {
  VehicleState v;
  v.x = x;
  v.y = y;
  v.heading = heading;
  v.speed = speed;
  v.lane_index = static_cast<int>(std::lround(y / 4.0));
  return v;
}

inline bool inside(const VehicleState& v, double px, double py) {
  const double dx = px - v.x, dy = py - v.y;
  const double c = std::cos(v.heading), s = std::sin(v.heading);
  const double u = dx * c + dy * s;
  const double w = -dx * s + dy * c;
  return std::abs(u) <= 0.5 * v.length && std::abs(w) <= 0.5 * v.width;
}

// Dense 1 cm point sampling over the intersection of the two bounding boxes.
inline bool raster_overlap(const VehicleState& a, const VehicleState& b) {
  auto extent = [](const VehicleState& v) {
    const double c = std::abs(std::cos(v.heading)), s = std::abs(std::sin(v.heading));
    return std::pair{0.5 * (v.length * c + v.width * s), 0.5 * (v.length * s + v.width * c)};
  };
  const auto [ax, ay] = extent(a);
  const auto [bx, by] = extent(b);
  const double x0 = std::max(a.x - ax, b.x - bx), x1 = std::min(a.x + ax, b.x + bx);
  const double y0 = std::max(a.y - ay, b.y - by), y1 = std::min(a.y + ay, b.y + by);
  if (x0 > x1 || y0 > y1) return false;
  const double h = 0.01;
  for (double px = std::floor(x0 / h) * h; px <= x1 + h; px += h)
    for (double py = std::floor(y0 / h) * h; py <= y1 + h; py += h)
      if (inside(a, px, py) && inside(b, px, py)) return true;
  return false;
}

inline VehicleState resized(VehicleState v, double delta) {
  v.length += 2.0 * delta;
  v.width += 2.0 * delta;
  return v;
}

}  // namespace bxrl::testing
