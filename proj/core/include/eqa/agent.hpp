#pragma once

#include "eqa/geometry.hpp"

#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace eqa {

enum class Action : uint8_t { Forward = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };
inline constexpr int kNumActions = 4;

char action_char(Action a);
Action action_from_char(char c);
std::string actions_to_string(const std::vector<Action>& actions);
std::vector<Action> actions_from_string(std::string_view s);

// Planar agent pose; the camera sits at a fixed eye height above it.
struct AgentState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;  // radians in [0, 2*pi), 0 = +x, counter-clockwise
  uint32_t step_count = 0;

  Vec2 direction() const { return Vec2(std::cos(heading), std::sin(heading)); }
};

struct MotionConfig {
  double forward_step = 0.25;
  double turn_angle = std::numbers::pi / 18.0;  // 10 degrees

  void validate() const;
};

// Pose after executing `a` ignoring obstacles (turns wrap the heading).
AgentState apply_motion(const AgentState& s, Action a, const MotionConfig& motion);

}  // namespace eqa
