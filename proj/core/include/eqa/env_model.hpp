#pragma once

#include "eqa/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eqa::env {

inline constexpr std::size_t kNumRoomTypes = 18;
inline constexpr std::size_t kNumCategories = 25;
inline constexpr std::size_t kNumColors = 24;

enum class RoomType : uint8_t {
  FamilyRoom, Closet, Spa, DiningRoom, Lounge, Gym, LivingRoom, Office, LaundryRoom,
  Bedroom, Foyer, Bathroom, Kitchen, Garage, RecRoom, MeetingRoom, Hallway, TvRoom
};

enum class Category : uint8_t {
  Shelving, Picture, Sink, Clothes, Appliances, Door, Plant, Furniture, Fireplace,
  ChestOfDrawers, Seating, Sofa, Table, Curtain, Shower, Towel, Cushion, Blinds, Counter,
  Stool, Bed, Chair, Bathtub, Toilet, Cabinet
};

// Kelly's 22 colours of maximum contrast followed by off-white and slate-grey.
enum class ColorName : uint8_t {
  White, Black, Yellow, Purple, Orange, LightBlue, Red, Buff, Gray, Green, PurplishPink,
  Blue, YellowishPink, Violet, OrangeYellow, PurplishRed, GreenishYellow, ReddishBrown,
  YellowGreen, YellowishBrown, ReddishOrange, OliveGreen, OffWhite, SlateGrey
};

std::string_view name(RoomType t);
std::string_view name(Category c);
std::string_view name(ColorName c);
Rgb palette_rgb(ColorName c);

RoomType parse_room_type(std::string_view s);
Category parse_category(std::string_view s);
ColorName parse_color(std::string_view s);

struct DoorSegment {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
};

struct RoomSpec {
  uint32_t room_id = 0;  // 1-based
  RoomType room_type = RoomType::LivingRoom;
  Box2 footprint;
  std::vector<DoorSegment> door_segments;
};

struct ObjectInstance {
  uint32_t object_id = 0;  // 1-based; 0 marks structure in point labels
  Category category = Category::Table;
  ColorName color_name = ColorName::Gray;
  Rgb color_rgb{0, 0, 0};
  Box3 box;
  uint32_t room_id = 0;
};

struct PointCloud {
  std::vector<Vec3f> positions;
  std::vector<Rgb> colors;
  std::vector<uint32_t> semantic;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  void reserve(std::size_t n);
  void push_back(const Vec3f& p, const Rgb& c, uint32_t label);
  bool consistent() const;
};

struct Environment {
  std::string id;
  uint64_t seed = 0;
  double wall_height = 2.5;
  double point_density = 0.0;
  std::vector<RoomSpec> rooms;
  std::vector<ObjectInstance> objects;
  std::vector<Rect3> surfaces;
  PointCloud global_cloud;
  Box3 bounds;

  const ObjectInstance& object(uint32_t object_id) const;
  const RoomSpec& room(uint32_t room_id) const;
  // Room whose footprint contains p, or 0.
  uint32_t room_at(const Vec2& p) const;
};

struct EnvGenSpec {
  double width = 10.0;
  double depth = 8.0;
  double wall_height = 2.5;
  int num_rooms = 4;
  int min_objects_per_room = 2;
  int max_objects_per_room = 4;
  double door_width = 1.0;
  double min_room_side = 2.5;
  double point_density = 300.0;  // points per square metre
  double wall_margin = 0.15;
  double object_gap = 0.45;
  double door_clearance = 0.9;
  // Connectivity is validated on a grid inflated by this radius.
  double validation_radius = 0.2;
  double validation_resolution = 0.05;
  int max_retries = 60;
};

// Deterministic in (spec, seed). Throws GenerationError with the violated
// invariant when no valid layout is found within spec.max_retries attempts.
Environment generate_environment(const EnvGenSpec& spec, uint64_t seed);

// Stratified jittered sampling of every surface. Labels are the owning
// object id (0 for walls and floors).
PointCloud sample_surface_points(std::span<const Rect3> surfaces, double density, uint64_t seed);
PointCloud sample_surface_points(const Environment& env, double density, uint64_t seed);

// Category/room pairs that occur exactly once in the environment.
std::vector<std::pair<Category, RoomType>> unique_object_room_pairs(const Environment& env);

// --- occupancy ------------------------------------------------------------

struct OccupancyGrid {
  Vec2 origin = Vec2::Zero();
  double resolution = 0.05;
  int width = 0;
  int height = 0;
  double agent_radius = 0.0;
  std::vector<uint8_t> cells;  // row-major, 1 = blocked

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width && iy < height; }
  bool blocked(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * width + ix] != 0; }
  bool free(int ix, int iy) const { return in_bounds(ix, iy) && !blocked(ix, iy); }
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * width + ix; }
  Vec2 cell_center(int ix, int iy) const {
    return origin + resolution * Vec2(ix + 0.5, iy + 0.5);
  }
  Box2 cell_box(int ix, int iy) const {
    return Box2{origin + resolution * Vec2(ix, iy), origin + resolution * Vec2(ix + 1, iy + 1)};
  }
  // Cell containing p (may be out of bounds).
  std::array<int, 2> cell_of(const Vec2& p) const;
  bool contains(const Vec2& p) const;
  bool is_free(const Vec2& p) const;
};

// 2D footprints that block motion: wall pieces (zero-thickness boxes) and
// object footprints.
std::vector<Box2> obstacle_footprints(const Environment& env);

// A cell is blocked when its closed square touches an obstacle or lies within
// agent_radius of one (strict).
OccupancyGrid occupancy_grid(const Environment& env, double resolution, double agent_radius);
OccupancyGrid occupancy_grid(const Box2& area, std::span<const Box2> obstacles, double resolution,
                             double agent_radius);

// 4-connected component labels over free cells (-1 for blocked).
std::vector<int> free_components(const OccupancyGrid& grid, int* count = nullptr);

}  // namespace eqa::env
