#include "eqa/pathfind.hpp"

#include "eqa/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <span>
#include <sstream>

namespace eqa {

char action_char(Action a) {
  switch (a) {
    case Action::Forward: return 'F';
    case Action::TurnLeft: return 'L';
    case Action::TurnRight: return 'R';
    case Action::Stop: return 'S';
  }
  return '?';
}

Action action_from_char(char c) {
  switch (c) {
    case 'F': return Action::Forward;
    case 'L': return Action::TurnLeft;
    case 'R': return Action::TurnRight;
    case 'S': return Action::Stop;
    default: throw DataError(std::string("unknown action character '") + c + "'");
  }
}

std::string actions_to_string(const std::vector<Action>& actions) {
  std::string s;
  s.reserve(actions.size());
  for (Action a : actions) s.push_back(action_char(a));
  return s;
}

std::vector<Action> actions_from_string(std::string_view s) {
  std::vector<Action> out;
  out.reserve(s.size());
  for (char c : s) out.push_back(action_from_char(c));
  return out;
}

void MotionConfig::validate() const {
  if (!(forward_step > 0.0)) throw ConfigError("forward_step must be positive");
  if (!(turn_angle > 0.0 && turn_angle <= std::numbers::pi / 2.0 + 1e-12)) {
    throw ConfigError("turn_angle must be in (0, pi/2]");
  }
}

AgentState apply_motion(const AgentState& s, Action a, const MotionConfig& motion) {
  AgentState next = s;
  next.step_count = s.step_count + 1;
  switch (a) {
    case Action::Forward: next.position = s.position + motion.forward_step * s.direction(); break;
    case Action::TurnLeft: next.heading = wrap_angle(s.heading + motion.turn_angle); break;
    case Action::TurnRight: next.heading = wrap_angle(s.heading - motion.turn_angle); break;
    case Action::Stop: break;
  }
  return next;
}

}  // namespace eqa

namespace eqa::path {
namespace {

// Closed cell range [lo, hi] of unit cells touched by the closed interval
// [a, b] (a <= b), in cell units.
std::pair<int, int> touched(double a, double b) {
  return {static_cast<int>(std::ceil(a)) - 1, static_cast<int>(std::floor(b))};
}

bool cell_blocked(const OccupancyGrid& g, int ix, int iy) {
  return g.in_bounds(ix, iy) && g.blocked(ix, iy);
}

struct Node {
  int ix, iy;
};

// Shared search graph: cells with the exact endpoints substituted for their
// own cells.
class SearchGraph {
 public:
  SearchGraph(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal)
      : grid_(grid), start_(start), goal_(goal) {
    if (!grid.contains(start) || !grid.contains(goal)) {
      throw NoPathError("path endpoint outside the grid");
    }
    if (!grid.is_free(start)) throw NoPathError("start position is blocked");
    if (!grid.is_free(goal)) throw NoPathError("goal position is blocked");
    start_id_ = id_of(start);
    goal_id_ = id_of(goal);
  }

  std::size_t size() const { return grid_.cells.size(); }
  std::size_t start_id() const { return start_id_; }
  std::size_t goal_id() const { return goal_id_; }

  Vec2 position(std::size_t id) const {
    if (id == goal_id_) return goal_;
    if (id == start_id_) return start_;
    return grid_.cell_center(static_cast<int>(id % grid_.width), static_cast<int>(id / grid_.width));
  }

  // Valid 8-neighbour edges: free target cell and a free segment between the
  // node positions.
  template <typename F>
  void for_each_neighbor(std::size_t id, F&& f) const {
    const int ix = static_cast<int>(id % grid_.width);
    const int iy = static_cast<int>(id / grid_.width);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = ix + dx, ny = iy + dy;
        if (!grid_.free(nx, ny)) continue;
        if (dx != 0 && dy != 0 && (!grid_.free(ix + dx, iy) || !grid_.free(ix, iy + dy))) continue;
        const std::size_t nid = grid_.index(nx, ny);
        if (!line_of_sight(grid_, position(id), position(nid))) continue;
        f(nid);
      }
    }
  }

  double dist(std::size_t a, std::size_t b) const { return (position(a) - position(b)).norm(); }
  double heuristic(std::size_t id) const { return (position(id) - goal_).norm(); }

 private:
  std::size_t id_of(const Vec2& p) const {
    auto [ix, iy] = grid_.cell_of(p);
    ix = std::min(ix, grid_.width - 1);
    iy = std::min(iy, grid_.height - 1);
    return grid_.index(ix, iy);
  }

  const OccupancyGrid& grid_;
  Vec2 start_, goal_;
  std::size_t start_id_ = 0, goal_id_ = 0;
};

struct QueueEntry {
  double f;
  double g;
  uint64_t seq;
  std::size_t id;
  bool operator>(const QueueEntry& o) const {
    if (f != o.f) return f > o.f;
    if (g != o.g) return g > o.g;
    return seq > o.seq;
  }
};

using OpenList = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

WaypointPath extract(const SearchGraph& graph, const std::vector<std::size_t>& parent,
                     std::size_t goal) {
  WaypointPath path;
  std::vector<Vec2> rev;
  for (std::size_t id = goal;; id = parent[id]) {
    rev.push_back(graph.position(id));
    if (id == graph.start_id()) break;
  }
  path.waypoints.assign(rev.rbegin(), rev.rend());
  for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
    path.length += (path.waypoints[i] - path.waypoints[i - 1]).norm();
  }
  return path;
}

WaypointPath trivial_path(const Vec2& start, const Vec2& goal) {
  WaypointPath p;
  p.waypoints = {start, goal};
  p.length = (goal - start).norm();
  return p;
}

}  // namespace

bool line_of_sight(const OccupancyGrid& grid, const Vec2& a, const Vec2& b) {
  if (!grid.contains(a) || !grid.contains(b)) {
    throw DataError("line_of_sight endpoint outside the grid");
  }
  Vec2 p = (a - grid.origin) / grid.resolution;
  Vec2 q = (b - grid.origin) / grid.resolution;
  if (p.x() > q.x()) std::swap(p, q);
  const auto [c0, c1] = touched(p.x(), q.x());
  const double dx = q.x() - p.x();
  for (int ix = c0; ix <= c1; ++ix) {
    // Portion of the segment inside the closed column [ix, ix + 1].
    double ya, yb;
    if (dx == 0.0) {
      ya = p.y();
      yb = q.y();
    } else {
      const double x0 = std::max<double>(ix, p.x());
      const double x1 = std::min<double>(ix + 1, q.x());
      if (x0 > x1) continue;
      const double slope = (q.y() - p.y()) / dx;
      ya = x0 == p.x() ? p.y() : p.y() + (x0 - p.x()) * slope;
      yb = x1 == q.x() ? q.y() : p.y() + (x1 - p.x()) * slope;
    }
    if (ya > yb) std::swap(ya, yb);
    const auto [r0, r1] = touched(ya, yb);
    for (int iy = r0; iy <= r1; ++iy) {
      if (cell_blocked(grid, ix, iy)) return false;
    }
  }
  return true;
}

WaypointPath lazy_theta_star(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal) {
  const SearchGraph graph(grid, start, goal);
  if (line_of_sight(grid, start, goal)) return trivial_path(start, goal);

  const std::size_t n = graph.size();
  std::vector<double> g(n, kInf), g_valid(n, kInf);
  std::vector<std::size_t> parent(n), parent_valid(n);
  std::vector<uint8_t> validated(n, 0), expanded(n, 0);
  OpenList open;
  uint64_t seq = 0;

  const std::size_t s = graph.start_id();
  g[s] = g_valid[s] = 0.0;
  parent[s] = parent_valid[s] = s;
  validated[s] = 1;
  open.push({graph.heuristic(s), 0.0, seq++, s});

  while (!open.empty()) {
    const QueueEntry top = open.top();
    open.pop();
    const std::size_t u = top.id;
    if (top.g != g[u]) continue;  // stale entry

    if (!validated[u]) {
      validated[u] = 1;
      if (!line_of_sight(grid, graph.position(parent[u]), graph.position(u))) {
        // Fall back to the best expanded neighbour or the best path known so far.
        double best = g_valid[u];
        std::size_t best_parent = parent_valid[u];
        graph.for_each_neighbor(u, [&](std::size_t v) {
          if (!expanded[v]) return;
          const double cand = g[v] + graph.dist(v, u);
          if (cand < best) {
            best = cand;
            best_parent = v;
          }
        });
        g[u] = best;
        parent[u] = best_parent;
        if (best < g_valid[u]) {
          g_valid[u] = best;
          parent_valid[u] = best_parent;
        }
        if (best > top.g) {
          open.push({best + graph.heuristic(u), best, seq++, u});
          continue;
        }
      } else if (g[u] < g_valid[u]) {
        g_valid[u] = g[u];
        parent_valid[u] = parent[u];
      }
    }
    if (u == graph.goal_id()) return extract(graph, parent, u);
    expanded[u] = 1;

    const std::size_t pu = parent[u];
    graph.for_each_neighbor(u, [&](std::size_t v) {
      const double cand = g[pu] + graph.dist(pu, v);
      if (cand < g[v] && cand < g_valid[v]) {
        g[v] = cand;
        parent[v] = pu;
        validated[v] = 0;
        open.push({cand + graph.heuristic(v), cand, seq++, v});
      }
    });
  }
  throw NoPathError("goal is not reachable from start");
}

WaypointPath astar8(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal) {
  const SearchGraph graph(grid, start, goal);
  const std::size_t n = graph.size();
  std::vector<double> g(n, kInf);
  std::vector<std::size_t> parent(n);
  std::vector<uint8_t> closed(n, 0);
  OpenList open;
  uint64_t seq = 0;
  const std::size_t s = graph.start_id();
  g[s] = 0.0;
  parent[s] = s;
  open.push({graph.heuristic(s), 0.0, seq++, s});
  while (!open.empty()) {
    const QueueEntry top = open.top();
    open.pop();
    const std::size_t u = top.id;
    if (top.g != g[u] || closed[u]) continue;
    if (u == graph.goal_id()) return extract(graph, parent, u);
    closed[u] = 1;
    graph.for_each_neighbor(u, [&](std::size_t v) {
      const double cand = g[u] + graph.dist(u, v);
      if (cand < g[v]) {
        g[v] = cand;
        parent[v] = u;
        closed[v] = 0;
        open.push({cand + graph.heuristic(v), cand, seq++, v});
      }
    });
  }
  throw NoPathError("goal is not reachable from start");
}

double geodesic_distance(const OccupancyGrid& grid, const Vec2& a, const Vec2& b) {
  if (a == b) return grid.contains(a) && grid.is_free(a) ? 0.0 : kInf;
  const bool swap = std::lexicographical_compare(b.data(), b.data() + 2, a.data(), a.data() + 2);
  try {
    return swap ? lazy_theta_star(grid, b, a).length : lazy_theta_star(grid, a, b).length;
  } catch (const NoPathError&) {
    return kInf;
  }
}

AgentState step_agent(const OccupancyGrid& grid, const AgentState& s, Action a,
                      const MotionConfig& motion, bool* collided) {
  AgentState next = apply_motion(s, a, motion);
  bool hit = false;
  if (a == Action::Forward) {
    hit = !grid.contains(next.position) || !line_of_sight(grid, s.position, next.position);
    if (hit) next.position = s.position;
  }
  if (collided) *collided = hit;
  return next;
}

namespace {

constexpr std::size_t kSearchBudget = 2000000;  // lattice nodes

// Breadth-first search over forward/turn sequences from `s` to any pose within
// `radius` of one of `targets` (checked in order). Positions are merged on a
// 1 cm lattice. Returns the actions and the index of the target reached.
std::optional<std::pair<std::vector<Action>, std::size_t>> lattice_search(
    const OccupancyGrid& grid, const AgentState& s, std::span<const Vec2> targets, double radius,
    const MotionConfig& motion, std::size_t max_nodes) {
  struct Node {
    AgentState state;
    std::size_t parent;
    Action action;
  };
  const auto reached = [&](const Vec2& p) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if ((targets[i] - p).norm() <= radius) return i;
    }
    return std::nullopt;
  };
  const auto key = [&](const AgentState& a) {
    const auto h = static_cast<int64_t>(std::lround(wrap_angle(a.heading) / motion.turn_angle));
    const auto x = static_cast<int64_t>(std::lround(a.position.x() * 100.0));
    const auto y = static_cast<int64_t>(std::lround(a.position.y() * 100.0));
    return std::array<int64_t, 3>{x, y, h};
  };
  std::vector<Node> nodes{{s, 0, Action::Stop}};
  std::set<std::array<int64_t, 3>> seen{key(s)};
  for (std::size_t i = 0; i < nodes.size() && nodes.size() < max_nodes; ++i) {
    for (Action a : {Action::Forward, Action::TurnLeft, Action::TurnRight}) {
      bool hit = false;
      const AgentState next = step_agent(grid, nodes[i].state, a, motion, &hit);
      if (hit || !seen.insert(key(next)).second) continue;
      nodes.push_back({next, i, a});
      if (a != Action::Forward) continue;
      if (const auto t = reached(next.position)) {
        std::vector<Action> actions;
        for (std::size_t j = nodes.size() - 1; j != 0; j = nodes[j].parent) {
          actions.push_back(nodes[j].action);
        }
        std::reverse(actions.begin(), actions.end());
        return std::pair{std::move(actions), *t};
      }
    }
  }
  return std::nullopt;
}

}  // namespace

FollowResult follow_path(const WaypointPath& path, const AgentState& start,
                         const MotionConfig& motion, const OccupancyGrid& grid,
                         std::optional<double> final_heading, const FollowOptions& options) {
  motion.validate();
  if (options.hold_tolerance < 0.5) throw ConfigError("hold_tolerance must be >= 0.5");
  if (path.waypoints.empty()) throw DataError("follow_path needs at least one waypoint");
  const double step = motion.forward_step;
  const double turn = motion.turn_angle;
  const auto patience = static_cast<int>(std::ceil(4.0 * (2.0 * std::numbers::pi / turn)));

  FollowResult out;
  AgentState s = start;
  out.states.push_back(s);
  const std::size_t last = path.waypoints.size() - 1;
  std::size_t k = std::min<std::size_t>(1, last);
  double best_d = kInf;
  int stalled = 0;
  Action prev = Action::Stop;

  auto emit = [&](Action a) {
    bool hit = false;
    s = step_agent(grid, s, a, motion, &hit);
    if (hit) throw GenerationError("follow_path produced a colliding step");
    out.actions.push_back(a);
    out.states.push_back(s);
    prev = a;
  };
  auto turn_toward = [&](double err) { emit(err > 0.0 ? Action::TurnLeft : Action::TurnRight); };
  auto stuck = [&](const Vec2& target) {
    std::ostringstream msg;
    msg << "follow_path made no progress toward waypoint " << k << " (" << target.x() << ", "
        << target.y() << ") from (" << s.position.x() << ", " << s.position.y() << ")";
    return GenerationError(msg.str());
  };

  while (true) {
    if (options.shortcut_grid != nullptr) {
      const std::size_t k0 = k;
      for (std::size_t j = last; j > k0; --j) {
        if (options.shortcut_grid->contains(s.position) &&
            line_of_sight(*options.shortcut_grid, s.position, path.waypoints[j])) {
          k = j;
          break;
        }
      }
      if (k != k0) best_d = kInf;
    }
    const Vec2 target = path.waypoints[k];
    const double d = (target - s.position).norm();
    if (d < best_d - 1e-9) {
      best_d = d;
      stalled = 0;
    } else if (++stalled > patience) {
      throw stuck(target);
    }

    if (k < last && d <= 0.5 * step) {
      ++k;
      best_d = kInf;
      continue;
    }
    const double err = d == 0.0 ? 0.0 : angle_diff(std::atan2(target.y() - s.position.y(),
                                                              target.x() - s.position.x()),
                                                   s.heading);
    const bool aligned = std::abs(err) <= 0.5 * turn + 1e-12;
    if (k == last) {
      const double d_next = (target - (s.position + step * s.direction())).norm();
      if (d <= 0.5 * step || (aligned && d_next >= d)) break;
    }
    const bool go = aligned || (prev == Action::Forward && std::abs(err) <= options.hold_tolerance * turn + 1e-12);
    const Vec2 ahead = s.position + step * s.direction();
    const bool open = grid.contains(ahead) && line_of_sight(grid, s.position, ahead);
    if (go && open) {
      emit(Action::Forward);
    } else if (aligned && !open) {
      // Facing the waypoint with the step blocked; turning alone cannot help.
      const std::span<const Vec2> rest(path.waypoints.data() + k, last - k + 1);
      const auto found = lattice_search(grid, s, rest, 0.5 * step, motion, kSearchBudget);
      if (!found) throw stuck(target);
      for (Action a : found->first) emit(a);
      k += found->second;
      if (k < last) ++k;
      best_d = kInf;
    } else {
      turn_toward(err == 0.0 ? 1.0 : err);
    }
  }

  if (final_heading) {
    for (int i = 0; i <= patience; ++i) {
      const double err = angle_diff(*final_heading, s.heading);
      if (std::abs(err) <= 0.5 * turn + 1e-9) break;
      turn_toward(err);
    }
  }
  emit(Action::Stop);
  return out;
}

}  // namespace eqa::path
