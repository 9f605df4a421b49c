#pragma once

#include "eqa/agent.hpp"
#include "eqa/env_model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace eqa::render {

using env::PointCloud;

// Pinhole camera. Camera frame: x right, y up, z forward (depth).
struct Camera {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double pitch = 0.0;
  double vertical_fov = 1.0471975511965976;  // 60 degrees
  double aspect = 4.0 / 3.0;
  double near = 0.05;
  double far = 20.0;

  void validate() const;
  Vec3 forward() const;
  Vec3 right() const;
  Vec3 up() const;
  double tan_half_v() const;
  double tan_half_h() const { return tan_half_v() * aspect; }

  Vec3 to_camera(const Vec3& world) const;
  // Normalised device coordinates of a camera-frame point (z must be > 0).
  Vec2 ndc(const Vec3& cam) const;
  // Unit world-space direction through the given NDC coordinates.
  Vec3 ray_direction(const Vec2& ndc) const;
};

// Closed-boundary tolerance applied to NDC comparisons.
inline constexpr double kFrustumTolerance = 1e-9;

// i is kept iff its NDC lies in [-1, 1]^2 and its depth in [near, far].
std::vector<uint32_t> frustum_cull(const PointCloud& cloud, const Camera& camera);
std::vector<uint32_t> frustum_cull(const PointCloud& cloud, std::span<const uint32_t> subset,
                                   const Camera& camera);

// Distance to the closest surface hit along a unit ray, ignoring hits closer
// than `min_distance`. +inf when nothing is hit.
double closest_hit(std::span<const Rect3> surfaces, const Vec3& origin, const Vec3& unit_dir,
                   double min_distance);

// Keeps a point iff |closest mesh hit along the camera->point ray - point
// distance| <= epsilon. Removes occluded and free-space points alike.
std::vector<uint32_t> ray_occlusion_filter(const PointCloud& cloud, std::span<const uint32_t> points,
                                           std::span<const Rect3> surfaces, const Camera& camera,
                                           double epsilon);

struct DepthBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> depths;  // planar depth, row-major, row 0 at the top; +inf for a miss

  float at(int px, int py) const { return depths[static_cast<std::size_t>(py) * width + px]; }
};

// Per-pixel camera-z depth of the closest hit along the pixel-centre ray.
DepthBuffer raster_depth_buffer(std::span<const Rect3> surfaces, const Camera& camera, int width,
                                int height);

// Pixel containing the projection of p, or nullopt when it falls outside
// the image or behind the camera.
std::optional<std::array<int, 2>> pixel_of(const Camera& camera, int width, int height,
                                           const Vec3& p);

// Same test as ray_occlusion_filter with the hit distance read from the
// pixel the point projects into. Points projecting outside are removed.
std::vector<uint32_t> raster_occlusion_filter(const PointCloud& cloud,
                                              std::span<const uint32_t> points,
                                              const DepthBuffer& depth, const Camera& camera,
                                              double epsilon);

inline constexpr uint32_t kMaxSparsityCount = 1u << 14;
inline constexpr int kNumSparsityBins = 5;

// floor(count / (2^14 / 5)) clamped to [0, 4].
uint8_t sparsity_bin(uint32_t count);

enum class OcclusionMode : uint8_t { Raster, Ray };

struct RenderConfig {
  double vertical_fov = 1.0471975511965976;
  double aspect = 4.0 / 3.0;
  double near = 0.05;
  double far = 20.0;
  double eye_height = 1.25;
  double pitch = -0.2;
  double epsilon = 0.25;  // metres
  int raster_width = 160;
  int raster_height = 120;
  OcclusionMode mode = OcclusionMode::Raster;
  uint32_t max_points = kMaxSparsityCount;
  double cell_size = 0.25;
  bool two_pass = true;
  uint64_t seed = 0;
};

Camera make_camera(const AgentState& state, const RenderConfig& config);

struct Observation {
  PointCloud cloud;                     // world frame
  std::vector<Vec3f> camera_points;     // camera frame, parallel to cloud
  std::vector<uint32_t> source_indices; // indices into the global cloud
  uint8_t sparsity_bin = 0;
  Camera camera;
  uint32_t visible_count = 0;           // before the max_points cap
  double kept_fraction = 1.0;           // cloud.size() / visible_count
  double point_spacing = 0.0;           // mean sample spacing after the cap (m)
};

struct RenderStats {
  std::size_t cells_total = 0;
  std::size_t cells_checked = 0;
  std::size_t points_tested = 0;
};

// Holds an environment plus the spatial cells used by the two-pass
// visibility check. Immutable after construction; render() is thread-safe.
class Renderer {
 public:
  explicit Renderer(const env::Environment& env, double cell_size = 0.25);

  const env::Environment& environment() const { return *env_; }
  double cell_size() const { return cell_size_; }

  Observation render(const AgentState& state, const RenderConfig& config,
                     RenderStats* stats = nullptr) const;

  // Global-cloud indices visible from `camera`: frustum cull plus the
  // configured occlusion filter over the full dense cloud, no cap.
  std::vector<uint32_t> visible_bruteforce(const Camera& camera, const RenderConfig& config) const;
  // Same result through the sparse cell pass followed by dense re-checks.
  std::vector<uint32_t> visible_two_pass(const Camera& camera, const RenderConfig& config,
                                         RenderStats* stats = nullptr) const;
  // Frustum and occlusion test restricted to `subset` of the global cloud.
  std::vector<uint32_t> visible_subset(const Camera& camera, const RenderConfig& config,
                                       std::span<const uint32_t> subset) const;

 private:
  struct Cell {
    Vec3 lo, hi;
    std::vector<uint32_t> members;
  };

  bool cell_may_be_visible(const Cell& cell, const Camera& camera, const DepthBuffer* depth,
                           double epsilon) const;

  const env::Environment* env_;
  double cell_size_;
  std::vector<Cell> cells_;
};

Observation render_observation(const env::Environment& env, const AgentState& state,
                               const RenderConfig& config);

// Observation dump: EQAC cloud plus a JSON sidecar {pose, bin, count}.
void save_observation(const Observation& obs, const AgentState& pose,
                      const std::string& cloud_path, const std::string& json_path);

}  // namespace eqa::render
