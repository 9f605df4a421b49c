#include "eqa/env_model.hpp"

#include "eqa/error.hpp"
#include "eqa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace eqa::env {
namespace {

constexpr std::array<std::string_view, kNumRoomTypes> kRoomNames = {
    "family room", "closet",   "spa",       "dining room", "lounge",  "gym",
    "living room", "office",   "laundry room", "bedroom",  "foyer",   "bathroom",
    "kitchen",     "garage",   "rec room",  "meeting room", "hallway", "tv room"};

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "shelving", "picture", "sink",    "clothes", "appliances", "door",     "plant",
    "furniture", "fireplace", "chest of drawers", "seating", "sofa",  "table",
    "curtain",  "shower",  "towel",   "cushion", "blinds",     "counter",  "stool",
    "bed",      "chair",   "bathtub", "toilet",  "cabinet"};

struct PaletteEntry {
  std::string_view name;
  Rgb rgb;
  double prior;  // relative frequency used by the generator
};

constexpr std::array<PaletteEntry, kNumColors> kPalette = {{
    {"white", {0xF2, 0xF3, 0xF4}, 2.0},
    {"black", {0x22, 0x22, 0x22}, 2.0},
    {"yellow", {0xF3, 0xC3, 0x00}, 1.0},
    {"purple", {0x87, 0x56, 0x92}, 1.0},
    {"orange", {0xF3, 0x84, 0x00}, 1.0},
    {"light blue", {0xA1, 0xCA, 0xF1}, 1.0},
    {"red", {0xBE, 0x00, 0x32}, 1.0},
    {"buff", {0xC2, 0xB2, 0x80}, 1.0},
    {"gray", {0x84, 0x84, 0x82}, 4.0},
    {"green", {0x00, 0x88, 0x56}, 1.0},
    {"purplish pink", {0xE6, 0x8F, 0xAC}, 1.0},
    {"blue", {0x00, 0x67, 0xA5}, 1.0},
    {"yellowish pink", {0xF9, 0x93, 0x79}, 1.0},
    {"violet", {0x60, 0x4E, 0x97}, 1.0},
    {"orange yellow", {0xF6, 0xA6, 0x00}, 1.0},
    {"purplish red", {0xB3, 0x44, 0x6C}, 1.0},
    {"greenish yellow", {0xDC, 0xD3, 0x00}, 1.0},
    {"reddish brown", {0x88, 0x2D, 0x17}, 1.0},
    {"yellow green", {0x8D, 0xB6, 0x00}, 1.0},
    {"yellowish brown", {0x65, 0x45, 0x22}, 1.0},
    {"reddish orange", {0xE2, 0x58, 0x22}, 1.0},
    {"olive green", {0x2B, 0x3D, 0x26}, 1.0},
    {"off-white", {0xFA, 0xF9, 0xF6}, 2.0},
    {"slate grey", {0x70, 0x80, 0x90}, 2.0},
}};

constexpr Rgb kFloorRgb{0x9A, 0x7B, 0x5C};
constexpr Rgb kWallRgb{0xD8, 0xD6, 0xCF};

using C = Category;

// Categories the generator places in each room type.
const std::array<std::vector<Category>, kNumRoomTypes>& room_priors() {
  static const std::array<std::vector<Category>, kNumRoomTypes> priors = {{
      {C::Sofa, C::Cushion, C::Table, C::Plant, C::Picture, C::Shelving, C::Seating, C::Fireplace},
      {C::Clothes, C::Shelving, C::Cabinet, C::ChestOfDrawers},
      {C::Bathtub, C::Towel, C::Plant, C::Seating, C::Shower, C::Sink},
      {C::Table, C::Chair, C::Picture, C::Plant, C::Cabinet, C::Curtain},
      {C::Sofa, C::Seating, C::Cushion, C::Table, C::Plant, C::Picture},
      {C::Appliances, C::Stool, C::Towel, C::Shelving, C::Plant},
      {C::Sofa, C::Cushion, C::Table, C::Fireplace, C::Picture, C::Plant, C::Curtain, C::Seating},
      {C::Table, C::Chair, C::Shelving, C::Cabinet, C::Plant, C::Picture},
      {C::Appliances, C::Clothes, C::Sink, C::Cabinet, C::Towel, C::Shelving},
      {C::Bed, C::ChestOfDrawers, C::Cushion, C::Curtain, C::Picture, C::Clothes, C::Blinds, C::Chair},
      {C::Door, C::Plant, C::Picture, C::Seating, C::Furniture, C::Stool},
      {C::Toilet, C::Sink, C::Bathtub, C::Shower, C::Towel, C::Cabinet, C::Blinds},
      {C::Counter, C::Sink, C::Appliances, C::Cabinet, C::Stool, C::Table},
      {C::Appliances, C::Shelving, C::Cabinet, C::Furniture, C::Door},
      {C::Sofa, C::Table, C::Seating, C::Stool, C::Picture, C::Furniture},
      {C::Table, C::Chair, C::Picture, C::Blinds, C::Plant, C::Seating},
      {C::Picture, C::Plant, C::Door, C::Furniture, C::Cabinet},
      {C::Sofa, C::Cushion, C::Furniture, C::Curtain, C::Table, C::Chair},
  }};
  return priors;
}

struct SizeRange {
  double min_side, max_side, min_h, max_h;
};

constexpr std::array<SizeRange, kNumCategories> kSizes = {{
    {0.35, 0.9, 1.2, 1.9},   // shelving
    {0.3, 0.6, 0.6, 1.1},    // picture
    {0.4, 0.7, 0.8, 1.0},    // sink
    {0.3, 0.6, 0.5, 1.2},    // clothes
    {0.5, 0.8, 0.8, 1.8},    // appliances
    {0.2, 0.4, 1.9, 2.1},    // door
    {0.3, 0.5, 0.4, 1.4},    // plant
    {0.4, 0.9, 0.5, 1.2},    // furniture
    {0.5, 0.9, 0.9, 1.3},    // fireplace
    {0.4, 0.9, 0.8, 1.3},    // chest of drawers
    {0.45, 0.8, 0.45, 1.0},  // seating
    {0.8, 1.4, 0.6, 0.9},    // sofa
    {0.6, 1.2, 0.7, 0.8},    // table
    {0.2, 0.4, 1.5, 2.2},    // curtain
    {0.8, 1.0, 1.9, 2.2},    // shower
    {0.2, 0.4, 0.4, 0.9},    // towel
    {0.3, 0.5, 0.3, 0.6},    // cushion
    {0.2, 0.4, 1.0, 1.6},    // blinds
    {0.6, 1.2, 0.9, 1.0},    // counter
    {0.3, 0.45, 0.45, 0.8},  // stool
    {1.0, 1.6, 0.5, 0.8},    // bed
    {0.4, 0.6, 0.8, 1.0},    // chair
    {0.7, 1.0, 0.5, 0.7},    // bathtub
    {0.4, 0.6, 0.4, 0.8},    // toilet
    {0.4, 0.9, 0.8, 1.9},    // cabinet
}};

struct Wall {
  int axis;       // 0: plane x = offset, spanning y; 1: plane y = offset, spanning x
  double offset;
  double s0, s1;
  std::vector<std::pair<double, double>> doors;
};

double snap(double v, double step) { return std::round(v / step) * step; }

template <typename T, std::size_t N>
std::size_t lookup(const std::array<T, N>& names, std::string_view s, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return i;
  }
  throw DataError(std::string("unknown ") + what + ": '" + std::string(s) + "'");
}

ColorName sample_color(Rng& rng) {
  double total = 0.0;
  for (const auto& e : kPalette) total += e.prior;
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < kPalette.size(); ++i) {
    r -= kPalette[i].prior;
    if (r < 0.0) return static_cast<ColorName>(i);
  }
  return ColorName::Gray;
}

struct Layout {
  std::vector<Box2> rooms;
  std::vector<Wall> walls;
};

// Guillotine partition of the floor into rooms; every split line becomes a wall.
bool partition(const EnvGenSpec& spec, Rng& rng, Layout& out, std::string& why) {
  out.rooms = {Box2{Vec2(0, 0), Vec2(spec.width, spec.depth)}};
  out.walls = {
      Wall{1, 0.0, 0.0, spec.width, {}},
      Wall{1, spec.depth, 0.0, spec.width, {}},
      Wall{0, 0.0, 0.0, spec.depth, {}},
      Wall{0, spec.width, 0.0, spec.depth, {}},
  };
  while (static_cast<int>(out.rooms.size()) < spec.num_rooms) {
    std::vector<std::size_t> order(out.rooms.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.rooms[a].area() > out.rooms[b].area();
    });
    bool split = false;
    for (std::size_t idx : order) {
      const Box2 box = out.rooms[idx];
      const Vec2 sz = box.size();
      const int axis = sz.x() >= sz.y() ? 0 : 1;
      const double len = sz[axis];
      if (len < 2.0 * spec.min_room_side) continue;
      const double lo = box.lo[axis] + spec.min_room_side;
      const double hi = box.hi[axis] - spec.min_room_side;
      double pos = snap(box.lo[axis] + rng.uniform(0.35, 0.65) * len, 0.05);
      pos = std::clamp(pos, std::ceil(lo / 0.05) * 0.05, std::floor(hi / 0.05) * 0.05);
      if (pos < lo - 1e-9 || pos > hi + 1e-9) continue;
      Box2 a = box, b = box;
      a.hi[axis] = pos;
      b.lo[axis] = pos;
      out.rooms[idx] = a;
      out.rooms.push_back(b);
      const int other = 1 - axis;
      out.walls.push_back(Wall{axis, pos, box.lo[other], box.hi[other], {}});
      split = true;
      break;
    }
    if (!split) {
      why = "room partition: no room large enough to split";
      return false;
    }
  }
  return true;
}

struct Adjacency {
  std::size_t a, b;
  std::size_t wall;
  double s0, s1;  // shared span along the wall
};

std::vector<Adjacency> adjacencies(const Layout& layout, double min_span) {
  std::vector<Adjacency> out;
  const auto& rooms = layout.rooms;
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    for (std::size_t j = i + 1; j < rooms.size(); ++j) {
      for (int axis = 0; axis < 2; ++axis) {
        double offset;
        if (rooms[i].hi[axis] == rooms[j].lo[axis]) {
          offset = rooms[i].hi[axis];
        } else if (rooms[j].hi[axis] == rooms[i].lo[axis]) {
          offset = rooms[j].hi[axis];
        } else {
          continue;
        }
        const int other = 1 - axis;
        const double s0 = std::max(rooms[i].lo[other], rooms[j].lo[other]);
        const double s1 = std::min(rooms[i].hi[other], rooms[j].hi[other]);
        if (s1 - s0 < min_span) continue;
        for (std::size_t w = 4; w < layout.walls.size(); ++w) {
          const Wall& wall = layout.walls[w];
          if (wall.axis == axis && wall.offset == offset && wall.s0 <= s0 && wall.s1 >= s1) {
            out.push_back({i, j, w, s0, s1});
            break;
          }
        }
      }
    }
  }
  return out;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

void add_box_faces(const ObjectInstance& obj, std::vector<Rect3>& out) {
  const Box3& b = obj.box;
  auto face = [&](int axis, double offset, Vec2 lo, Vec2 hi) {
    out.push_back(Rect3{axis, offset, lo, hi, obj.object_id, obj.color_rgb});
  };
  face(0, b.lo.x(), Vec2(b.lo.y(), b.lo.z()), Vec2(b.hi.y(), b.hi.z()));
  face(0, b.hi.x(), Vec2(b.lo.y(), b.lo.z()), Vec2(b.hi.y(), b.hi.z()));
  face(1, b.lo.y(), Vec2(b.lo.x(), b.lo.z()), Vec2(b.hi.x(), b.hi.z()));
  face(1, b.hi.y(), Vec2(b.lo.x(), b.lo.z()), Vec2(b.hi.x(), b.hi.z()));
  face(2, b.hi.z(), Vec2(b.lo.x(), b.lo.y()), Vec2(b.hi.x(), b.hi.y()));
}

bool try_generate(const EnvGenSpec& spec, Rng& rng, Environment& env, std::string& why) {
  Layout layout;
  if (!partition(spec, rng, layout, why)) return false;

  // Doors: random spanning tree over adjacent rooms, plus occasional extras.
  const double end_margin = 0.3;
  auto adj = adjacencies(layout, spec.door_width + 2.0 * end_margin);
  for (std::size_t i = adj.size(); i > 1; --i) std::swap(adj[i - 1], adj[rng.uniform_int(i)]);
  std::vector<std::size_t> parent(layout.rooms.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<Adjacency> doors;
  for (const auto& a : adj) {
    const std::size_t ra = find_root(parent, a.a), rb = find_root(parent, a.b);
    if (ra != rb) {
      parent[ra] = rb;
      doors.push_back(a);
    } else if (rng.bernoulli(0.25)) {
      doors.push_back(a);
    }
  }
  for (std::size_t i = 0; i < layout.rooms.size(); ++i) {
    if (find_root(parent, i) != find_root(parent, 0)) {
      why = "room connectivity: door graph does not connect all rooms";
      return false;
    }
  }

  env.rooms.clear();
  for (std::size_t i = 0; i < layout.rooms.size(); ++i) {
    RoomSpec room;
    room.room_id = static_cast<uint32_t>(i + 1);
    room.room_type = static_cast<RoomType>(rng.uniform_int(kNumRoomTypes));
    room.footprint = layout.rooms[i];
    env.rooms.push_back(room);
  }
  for (const auto& d : doors) {
    const double half = 0.5 * spec.door_width;
    const double c = snap(rng.uniform(d.s0 + end_margin + half, d.s1 - end_margin - half), 0.05);
    Wall& wall = layout.walls[d.wall];
    wall.doors.emplace_back(c - half, c + half);
    DoorSegment seg;
    seg.a[wall.axis] = wall.offset;
    seg.b[wall.axis] = wall.offset;
    seg.a[1 - wall.axis] = c - half;
    seg.b[1 - wall.axis] = c + half;
    env.rooms[d.a].door_segments.push_back(seg);
    env.rooms[d.b].door_segments.push_back(seg);
  }

  // Objects.
  env.objects.clear();
  for (auto& room : env.rooms) {
    const auto& prior = room_priors()[static_cast<std::size_t>(room.room_type)];
    const int lo = spec.min_objects_per_room, hi = spec.max_objects_per_room;
    const int count = lo + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hi - lo + 1)));
    int placed = 0;
    for (int k = 0; k < count; ++k) {
      const Category cat = prior[rng.uniform_int(prior.size())];
      const SizeRange& sr = kSizes[static_cast<std::size_t>(cat)];
      for (int attempt = 0; attempt < 40; ++attempt) {
        const double w = snap(rng.uniform(sr.min_side, sr.max_side), 0.05);
        const double d = snap(rng.uniform(sr.min_side, sr.max_side), 0.05);
        const double h = snap(rng.uniform(sr.min_h, sr.max_h), 0.05);
        const Box2& fp = room.footprint;
        const double xlo = fp.lo.x() + spec.wall_margin, xhi = fp.hi.x() - spec.wall_margin - w;
        const double ylo = fp.lo.y() + spec.wall_margin, yhi = fp.hi.y() - spec.wall_margin - d;
        if (xhi <= xlo || yhi <= ylo) continue;
        const double x = snap(rng.uniform(xlo, xhi), 0.05);
        const double y = snap(rng.uniform(ylo, yhi), 0.05);
        Box2 foot{Vec2(x, y), Vec2(x + w, y + d)};
        if (!fp.contains_strictly(foot)) continue;
        bool ok = true;
        for (const auto& other : env.objects) {
          if (box_distance(foot, other.box.footprint()) < spec.object_gap) ok = false;
        }
        for (const auto& rm : env.rooms) {
          for (const auto& door : rm.door_segments) {
            Box2 db{door.a.cwiseMin(door.b), door.a.cwiseMax(door.b)};
            if (box_distance(foot, db) < spec.door_clearance) ok = false;
          }
        }
        if (!ok) continue;
        ObjectInstance obj;
        obj.object_id = static_cast<uint32_t>(env.objects.size() + 1);
        obj.category = cat;
        obj.color_name = sample_color(rng);
        obj.color_rgb = palette_rgb(obj.color_name);
        obj.box = Box3{Vec3(x, y, 0.0), Vec3(x + w, y + d, h)};
        obj.room_id = room.room_id;
        env.objects.push_back(obj);
        ++placed;
        break;
      }
    }
    if (placed == 0) {
      why = "object placement: room " + std::to_string(room.room_id) + " received no object";
      return false;
    }
  }

  // Occluder surfaces: floors, wall pieces between doors, object faces.
  env.surfaces.clear();
  for (const auto& room : env.rooms) {
    env.surfaces.push_back(Rect3{2, 0.0, room.footprint.lo, room.footprint.hi, 0, kFloorRgb});
  }
  for (auto& wall : layout.walls) {
    std::sort(wall.doors.begin(), wall.doors.end());
    double cursor = wall.s0;
    auto emit = [&](double a, double b) {
      if (b - a <= 1e-9) return;
      env.surfaces.push_back(
          Rect3{wall.axis, wall.offset, Vec2(a, 0.0), Vec2(b, spec.wall_height), 0, kWallRgb});
    };
    for (const auto& [a, b] : wall.doors) {
      emit(cursor, a);
      cursor = b;
    }
    emit(cursor, wall.s1);
  }
  for (const auto& obj : env.objects) add_box_faces(obj, env.surfaces);

  env.wall_height = spec.wall_height;
  env.bounds = Box3{Vec3(0, 0, 0), Vec3(spec.width, spec.depth, spec.wall_height)};

  if (unique_object_room_pairs(env).empty()) {
    why = "questions: no unique (object, room) pair";
    return false;
  }

  const OccupancyGrid grid =
      occupancy_grid(env, spec.validation_resolution, spec.validation_radius);
  int ncomp = 0;
  const auto labels = free_components(grid, &ncomp);
  if (ncomp == 0) {
    why = "reachability: no free space";
    return false;
  }
  std::vector<std::size_t> sizes(static_cast<std::size_t>(ncomp), 0);
  for (int l : labels) {
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  }
  const int main = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (const auto& room : env.rooms) {
    bool reached = false;
    for (int iy = 0; iy < grid.height && !reached; ++iy) {
      for (int ix = 0; ix < grid.width && !reached; ++ix) {
        if (labels[grid.index(ix, iy)] == main &&
            room.footprint.contains(grid.cell_center(ix, iy))) {
          reached = true;
        }
      }
    }
    if (!reached) {
      why = "reachability: room " + std::to_string(room.room_id) +
            " is not connected to the main free space";
      return false;
    }
  }
  return true;
}

}  // namespace

std::string_view name(RoomType t) { return kRoomNames[static_cast<std::size_t>(t)]; }
std::string_view name(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }
std::string_view name(ColorName c) { return kPalette[static_cast<std::size_t>(c)].name; }
Rgb palette_rgb(ColorName c) { return kPalette[static_cast<std::size_t>(c)].rgb; }

RoomType parse_room_type(std::string_view s) {
  return static_cast<RoomType>(lookup(kRoomNames, s, "room type"));
}
Category parse_category(std::string_view s) {
  return static_cast<Category>(lookup(kCategoryNames, s, "object category"));
}
ColorName parse_color(std::string_view s) {
  for (std::size_t i = 0; i < kPalette.size(); ++i) {
    if (kPalette[i].name == s) return static_cast<ColorName>(i);
  }
  throw DataError("unknown color: '" + std::string(s) + "'");
}

void PointCloud::reserve(std::size_t n) {
  positions.reserve(n);
  colors.reserve(n);
  semantic.reserve(n);
}

void PointCloud::push_back(const Vec3f& p, const Rgb& c, uint32_t label) {
  positions.push_back(p);
  colors.push_back(c);
  semantic.push_back(label);
}

bool PointCloud::consistent() const {
  if (colors.size() != positions.size() || semantic.size() != positions.size()) return false;
  return std::all_of(positions.begin(), positions.end(),
                     [](const Vec3f& p) { return p.allFinite(); });
}

const ObjectInstance& Environment::object(uint32_t object_id) const {
  if (object_id == 0 || object_id > objects.size() || objects[object_id - 1].object_id != object_id) {
    auto it = std::find_if(objects.begin(), objects.end(),
                           [&](const ObjectInstance& o) { return o.object_id == object_id; });
    if (it == objects.end()) throw DataError("object " + std::to_string(object_id) + " not found");
    return *it;
  }
  return objects[object_id - 1];
}

const RoomSpec& Environment::room(uint32_t room_id) const {
  auto it = std::find_if(rooms.begin(), rooms.end(),
                         [&](const RoomSpec& r) { return r.room_id == room_id; });
  if (it == rooms.end()) throw DataError("room " + std::to_string(room_id) + " not found");
  return *it;
}

uint32_t Environment::room_at(const Vec2& p) const {
  for (const auto& r : rooms) {
    if (r.footprint.contains(p)) return r.room_id;
  }
  return 0;
}

Environment generate_environment(const EnvGenSpec& spec, uint64_t seed) {
  if (spec.num_rooms < 2) throw ConfigError("environment needs at least 2 rooms");
  if (spec.min_objects_per_room < 1 || spec.max_objects_per_room < spec.min_objects_per_room) {
    throw ConfigError("objects per room must satisfy 1 <= min <= max");
  }
  if (spec.width < 4.0 || spec.depth < 4.0) throw ConfigError("environment bounds must be >= 4x4 m");
  if (spec.point_density <= 0.0) throw ConfigError("point density must be positive");

  std::string why = "no attempt made";
  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(attempt)));
    Environment env;
    if (!try_generate(spec, rng, env, why)) continue;
    env.id = "env_" + std::to_string(seed);
    env.seed = seed;
    env.point_density = spec.point_density;
    env.global_cloud = sample_surface_points(env, spec.point_density, mix_seed(seed, 0xC10D));
    return env;
  }
  throw GenerationError("environment generation failed after " +
                        std::to_string(spec.max_retries) + " attempts; last violation: " + why);
}

PointCloud sample_surface_points(std::span<const Rect3> surfaces, double density, uint64_t seed) {
  if (!(density > 0.0)) throw ConfigError("sampling density must be positive");
  Rng rng(seed);
  PointCloud cloud;
  const double spacing = 1.0 / std::sqrt(density);
  for (const Rect3& s : surfaces) {
    const double lu = s.hi.x() - s.lo.x();
    const double lv = s.hi.y() - s.lo.y();
    const long nu = std::max(1L, std::lround(lu / spacing));
    const long nv = std::max(1L, std::lround(lv / spacing));
    cloud.reserve(cloud.size() + static_cast<std::size_t>(nu * nv));
    for (long j = 0; j < nv; ++j) {
      for (long i = 0; i < nu; ++i) {
        const double u = s.lo.x() + (static_cast<double>(i) + rng.uniform()) * lu / nu;
        const double v = s.lo.y() + (static_cast<double>(j) + rng.uniform()) * lv / nv;
        cloud.push_back(s.point(u, v).cast<float>(), s.rgb, s.owner);
      }
    }
  }
  return cloud;
}

PointCloud sample_surface_points(const Environment& env, double density, uint64_t seed) {
  return sample_surface_points(std::span<const Rect3>(env.surfaces), density, seed);
}

std::vector<std::pair<Category, RoomType>> unique_object_room_pairs(const Environment& env) {
  std::map<std::pair<Category, RoomType>, int> counts;
  for (const auto& obj : env.objects) {
    ++counts[{obj.category, env.room(obj.room_id).room_type}];
  }
  std::vector<std::pair<Category, RoomType>> out;
  for (const auto& [key, n] : counts) {
    if (n == 1) out.push_back(key);
  }
  return out;
}

}  // namespace eqa::env
