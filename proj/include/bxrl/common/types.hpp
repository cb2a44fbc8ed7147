#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace bxrl {

// Discrete meta-actions, in the order used by the action head.
enum class Action : int { Left = 0, Idle = 1, Right = 2, Faster = 3, Slower = 4 };

inline constexpr int kNumActions = 5;

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Left, Action::Idle, Action::Right, Action::Faster, Action::Slower};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);
Action action_from_id(int id);

inline constexpr int action_id(Action a) { return static_cast<int>(a); }

// 5x5 observation matrix, row-major. Row 0 is the ego vehicle, rows 1-4 the
// sensed NPCs; columns are presence, x, y, vx, vy.
inline constexpr int kObsRows = 5;
inline constexpr int kObsCols = 5;
inline constexpr int kObsSize = kObsRows * kObsCols;

using Observation = std::array<double, kObsSize>;

inline constexpr std::size_t obs_index(int row, int col) {
  return static_cast<std::size_t>(row * kObsCols + col);
}

}  // namespace bxrl
