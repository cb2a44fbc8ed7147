#include "bxrl/env/geometry.hpp"

#include <array>
#include <cmath>

namespace bxrl::env {
namespace {

struct Box {
  double cx, cy;
  double ux, uy;  // unit vector along the length
  double vx, vy;  // unit vector along the width
  double half_l, half_w;
};

Box to_box(const VehicleState& s) {
  const double c = std::cos(s.heading);
  const double n = std::sin(s.heading);
  return {s.x, s.y, c, n, -n, c, 0.5 * s.length, 0.5 * s.width};
}

double projected_radius(const Box& b, double nx, double ny) {
  return b.half_l * std::abs(b.ux * nx + b.uy * ny) + b.half_w * std::abs(b.vx * nx + b.vy * ny);
}

}  // namespace

bool sat_overlap(const VehicleState& a, const VehicleState& b) {
  const Box ba = to_box(a);
  const Box bb = to_box(b);
  const double dx = bb.cx - ba.cx;
  const double dy = bb.cy - ba.cy;
  const std::array<std::array<double, 2>, 4> axes = {{
      {ba.ux, ba.uy}, {ba.vx, ba.vy}, {bb.ux, bb.uy}, {bb.vx, bb.vy}}};
  for (const auto& n : axes) {
    const double distance = std::abs(dx * n[0] + dy * n[1]);
    if (distance > projected_radius(ba, n[0], n[1]) + projected_radius(bb, n[0], n[1]))
      return false;
  }
  return true;
}

bool may_overlap(const VehicleState& a, const VehicleState& b) {
  const double ra = 0.5 * std::hypot(a.length, a.width);
  const double rb = 0.5 * std::hypot(b.length, b.width);
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy <= (ra + rb) * (ra + rb);
}

}  // namespace bxrl::env
