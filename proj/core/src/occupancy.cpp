#include "eqa/env_model.hpp"

#include "eqa/error.hpp"

#include <cmath>

namespace eqa::env {

std::array<int, 2> OccupancyGrid::cell_of(const Vec2& p) const {
  const Vec2 q = (p - origin) / resolution;
  return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
}

bool OccupancyGrid::contains(const Vec2& p) const {
  const Vec2 q = (p - origin) / resolution;
  return q.x() >= 0.0 && q.y() >= 0.0 && q.x() <= width && q.y() <= height;
}

bool OccupancyGrid::is_free(const Vec2& p) const {
  auto [ix, iy] = cell_of(p);
  // Points on the far boundary belong to the last cell.
  if (ix == width) --ix;
  if (iy == height) --iy;
  return free(ix, iy);
}

std::vector<Box2> obstacle_footprints(const Environment& env) {
  std::vector<Box2> out;
  for (const Rect3& s : env.surfaces) {
    if (s.owner != 0 || s.axis == 2) continue;
    // Vertical wall piece: in-plane coordinates are (horizontal, z).
    const int horiz = s.axis == 0 ? 1 : 0;
    Box2 b;
    b.lo[s.axis] = s.offset;
    b.hi[s.axis] = s.offset;
    b.lo[horiz] = s.lo.x();
    b.hi[horiz] = s.hi.x();
    out.push_back(b);
  }
  for (const auto& obj : env.objects) out.push_back(obj.box.footprint());
  return out;
}

OccupancyGrid occupancy_grid(const Box2& area, std::span<const Box2> obstacles, double resolution,
                             double agent_radius) {
  if (!(resolution > 0.0) || resolution > 0.5) {
    throw ConfigError("grid resolution must be in (0, 0.5]");
  }
  if (agent_radius < 0.0) throw ConfigError("agent radius must be >= 0");
  const Vec2 size = area.size();
  if (!(size.x() > resolution) || !(size.y() > resolution)) {
    throw ConfigError("degenerate occupancy bounds");
  }
  OccupancyGrid grid;
  grid.origin = area.lo;
  grid.resolution = resolution;
  grid.agent_radius = agent_radius;
  grid.width = static_cast<int>(std::ceil(size.x() / resolution - 1e-9));
  grid.height = static_cast<int>(std::ceil(size.y() / resolution - 1e-9));
  grid.cells.assign(static_cast<std::size_t>(grid.width) * grid.height, 0);

  for (const Box2& ob : obstacles) {
    const Vec2 lo = (ob.lo - grid.origin) / resolution;
    const Vec2 hi = (ob.hi - grid.origin) / resolution;
    const double pad = agent_radius / resolution + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(lo.x() - pad)));
    const int y0 = std::max(0, static_cast<int>(std::floor(lo.y() - pad)));
    const int x1 = std::min(grid.width - 1, static_cast<int>(std::floor(hi.x() + pad)));
    const int y1 = std::min(grid.height - 1, static_cast<int>(std::floor(hi.y() + pad)));
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        const double d = box_distance(grid.cell_box(ix, iy), ob);
        if (d == 0.0 || d < agent_radius) grid.cells[grid.index(ix, iy)] = 1;
      }
    }
  }
  return grid;
}

OccupancyGrid occupancy_grid(const Environment& env, double resolution, double agent_radius) {
  const auto obstacles = obstacle_footprints(env);
  return occupancy_grid(env.bounds.footprint(), obstacles, resolution, agent_radius);
}

std::vector<int> free_components(const OccupancyGrid& grid, int* count) {
  std::vector<int> label(grid.cells.size(), -1);
  int next = 0;
  std::vector<std::array<int, 2>> stack;
  for (int sy = 0; sy < grid.height; ++sy) {
    for (int sx = 0; sx < grid.width; ++sx) {
      if (grid.blocked(sx, sy) || label[grid.index(sx, sy)] >= 0) continue;
      label[grid.index(sx, sy)] = next;
      stack.push_back({sx, sy});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (!grid.free(nx, ny) || label[grid.index(nx, ny)] >= 0) continue;
          label[grid.index(nx, ny)] = next;
          stack.push_back({nx, ny});
        }
      }
      ++next;
    }
  }
  if (count) *count = next;
  return label;
}

}  // namespace eqa::env
