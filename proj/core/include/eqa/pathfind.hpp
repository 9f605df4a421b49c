#pragma once

#include "eqa/agent.hpp"
#include "eqa/env_model.hpp"

#include <optional>
#include <vector>

namespace eqa::path {

using env::OccupancyGrid;

struct WaypointPath {
  std::vector<Vec2> waypoints;
  double length = 0.0;
};

// True iff no blocked cell's closed square meets the closed segment a-b.
// Cells outside the grid are ignored. Throws DataError when an endpoint lies
// outside the grid.
bool line_of_sight(const OccupancyGrid& grid, const Vec2& a, const Vec2& b);

// Any-angle path over cell nodes. The start and goal cells are represented by
// the exact start and goal points, every other cell by its centre. Throws
// NoPathError when either endpoint is blocked or the goal is unreachable.
WaypointPath lazy_theta_star(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal);

// 8-connected A* over the same nodes and edges (diagonals need both
// orthogonal neighbours free). Reference for path-length bounds.
WaypointPath astar8(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal);

// LazyTheta* length with canonically ordered endpoints, so the result is
// symmetric. +inf when no path exists or an endpoint is blocked.
double geodesic_distance(const OccupancyGrid& grid, const Vec2& a, const Vec2& b);

// Pose after `a`. A forward step whose segment is not line-of-sight free is a
// no-op reported through `collided`.
AgentState step_agent(const OccupancyGrid& grid, const AgentState& s, Action a,
                      const MotionConfig& motion, bool* collided = nullptr);

struct FollowResult {
  std::vector<Action> actions;  // ends with Stop
  std::vector<AgentState> states;  // actions.size() + 1 poses, states[0] = start
};

struct FollowOptions {
  // While already moving forward, keep going up to this bearing error
  // (in units of the turn angle).
  double hold_tolerance = 1.0;
  // When set, skip ahead to the furthest waypoint visible on this grid.
  const OccupancyGrid* shortcut_grid = nullptr;
};

// Greedy waypoint follower. Moves forward when the bearing error is within
// turn/2 (or within hold_tolerance * turn right after a forward step) and the
// step is free; otherwise turns the shorter way. With `final_heading` the
// agent turns in place at the end until aligned within turn/2. When aligned
// with a waypoint but blocked, a bounded search over action sequences moves the
// agent to within step/2 of that or a later waypoint.
// Throws GenerationError when no progress is made for 4 * (2 pi / turn) steps.
FollowResult follow_path(const WaypointPath& path, const AgentState& start,
                         const MotionConfig& motion, const OccupancyGrid& grid,
                         std::optional<double> final_heading = std::nullopt,
                         const FollowOptions& options = {});

}  // namespace eqa::path
