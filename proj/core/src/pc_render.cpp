#include "eqa/pc_render.hpp"

#include "eqa/env_io.hpp"
#include "eqa/error.hpp"
#include "eqa/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <map>

namespace eqa::render {
namespace {

struct Projected {
  Vec3 cam;
  Vec2 ndc;
};

// Frustum membership for a single point; fills the camera-frame position.
bool in_frustum(const Camera& camera, const Vec3& p, Projected* out) {
  const Vec3 c = camera.to_camera(p);
  if (c.z() < camera.near || c.z() > camera.far) return false;
  const Vec2 n = camera.ndc(c);
  constexpr double lim = 1.0 + kFrustumTolerance;
  if (std::abs(n.x()) > lim || std::abs(n.y()) > lim) return false;
  if (out) *out = Projected{c, n};
  return true;
}

std::array<int, 2> pixel_from_ndc(const Vec2& ndc, int width, int height) {
  const int px = std::clamp(static_cast<int>(std::floor((ndc.x() + 1.0) * 0.5 * width)), 0, width - 1);
  const int py = std::clamp(static_cast<int>(std::floor((1.0 - ndc.y()) * 0.5 * height)), 0, height - 1);
  return {px, py};
}

bool keep_by_distance(double hit, double dist, double epsilon) {
  return std::abs(hit - dist) <= epsilon;
}

}  // namespace

void Camera::validate() const {
  if (!(vertical_fov > 0.0 && vertical_fov < std::numbers::pi)) {
    throw ConfigError("camera vertical fov must be in (0, pi)");
  }
  if (!(near > 0.0 && near < far)) throw ConfigError("camera requires 0 < near < far");
  if (!(aspect > 0.0)) throw ConfigError("camera aspect must be positive");
}

Vec3 Camera::forward() const {
  return Vec3(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
}

Vec3 Camera::right() const { return Vec3(std::sin(yaw), -std::cos(yaw), 0.0); }

Vec3 Camera::up() const { return right().cross(forward()); }

double Camera::tan_half_v() const { return std::tan(0.5 * vertical_fov); }

Vec3 Camera::to_camera(const Vec3& world) const {
  const Vec3 d = world - position;
  return Vec3(d.dot(right()), d.dot(up()), d.dot(forward()));
}

Vec2 Camera::ndc(const Vec3& cam) const {
  const double tv = tan_half_v();
  return Vec2(cam.x() / (cam.z() * tv * aspect), cam.y() / (cam.z() * tv));
}

Vec3 Camera::ray_direction(const Vec2& n) const {
  const double tv = tan_half_v();
  const Vec3 d = forward() + n.x() * tv * aspect * right() + n.y() * tv * up();
  return d.normalized();
}

std::vector<uint32_t> frustum_cull(const PointCloud& cloud, std::span<const uint32_t> subset,
                                   const Camera& camera) {
  std::vector<uint32_t> out;
  for (uint32_t i : subset) {
    if (in_frustum(camera, cloud.positions[i].cast<double>(), nullptr)) out.push_back(i);
  }
  return out;
}

std::vector<uint32_t> frustum_cull(const PointCloud& cloud, const Camera& camera) {
  camera.validate();
  std::vector<uint32_t> out;
  for (uint32_t i = 0; i < cloud.size(); ++i) {
    if (in_frustum(camera, cloud.positions[i].cast<double>(), nullptr)) out.push_back(i);
  }
  return out;
}

double closest_hit(std::span<const Rect3> surfaces, const Vec3& origin, const Vec3& unit_dir,
                   double min_distance) {
  double best = kInf;
  for (const Rect3& s : surfaces) {
    if (auto t = s.intersect(origin, unit_dir); t && *t >= min_distance && *t < best) best = *t;
  }
  return best;
}

std::vector<uint32_t> ray_occlusion_filter(const PointCloud& cloud, std::span<const uint32_t> points,
                                           std::span<const Rect3> surfaces, const Camera& camera,
                                           double epsilon) {
  std::vector<uint32_t> out;
  for (uint32_t i : points) {
    const Vec3 p = cloud.positions[i].cast<double>();
    const Vec3 d = p - camera.position;
    const double dist = d.norm();
    if (dist == 0.0) continue;
    const double hit = closest_hit(surfaces, camera.position, d / dist, camera.near);
    if (keep_by_distance(hit, dist, epsilon)) out.push_back(i);
  }
  return out;
}

DepthBuffer raster_depth_buffer(std::span<const Rect3> surfaces, const Camera& camera, int width,
                                int height) {
  camera.validate();
  if (width < 8 || height < 8) throw ConfigError("depth buffer must be at least 8x8");
  DepthBuffer buf;
  buf.width = width;
  buf.height = height;
  buf.depths.assign(static_cast<std::size_t>(width) * height, std::numeric_limits<float>::infinity());

  const Vec3 fwd = camera.forward();
  std::vector<Vec3> dirs(buf.depths.size());
  std::vector<double> cosines(buf.depths.size());
  for (int py = 0; py < height; ++py) {
    for (int px = 0; px < width; ++px) {
      const Vec2 n((px + 0.5) / width * 2.0 - 1.0, 1.0 - (py + 0.5) / height * 2.0);
      const std::size_t k = static_cast<std::size_t>(py) * width + px;
      dirs[k] = camera.ray_direction(n);
      cosines[k] = dirs[k].dot(fwd);
    }
  }
  std::vector<double> best(buf.depths.size(), kInf);

  for (const Rect3& s : surfaces) {
    // Screen-space bound of the rectangle; falls back to the full image when
    // it straddles the camera plane.
    int x0 = 0, x1 = width - 1, y0 = 0, y1 = height - 1;
    const auto corners = s.corners();
    int behind = 0, in_front = 0;
    Vec2 lo(kInf, kInf), hi(-kInf, -kInf);
    for (const Vec3& c : corners) {
      const Vec3 cc = camera.to_camera(c);
      if (cc.z() <= 1e-9) {
        ++behind;
        continue;
      }
      ++in_front;
      const Vec2 n = camera.ndc(cc);
      lo = lo.cwiseMin(n);
      hi = hi.cwiseMax(n);
    }
    if (in_front == 0) continue;
    if (behind == 0) {
      if (lo.x() > 1.0 || lo.y() > 1.0 || hi.x() < -1.0 || hi.y() < -1.0) continue;
      const auto a = pixel_from_ndc(Vec2(lo.x(), hi.y()), width, height);
      const auto b = pixel_from_ndc(Vec2(hi.x(), lo.y()), width, height);
      x0 = a[0];
      y0 = a[1];
      x1 = b[0];
      y1 = b[1];
    }
    for (int py = y0; py <= y1; ++py) {
      for (int px = x0; px <= x1; ++px) {
        const std::size_t k = static_cast<std::size_t>(py) * width + px;
        if (auto t = s.intersect(camera.position, dirs[k])) {
          const double z = *t * cosines[k];
          if (z >= camera.near && z < best[k]) best[k] = z;
        }
      }
    }
  }
  for (std::size_t k = 0; k < best.size(); ++k) buf.depths[k] = static_cast<float>(best[k]);
  return buf;
}

std::optional<std::array<int, 2>> pixel_of(const Camera& camera, int width, int height,
                                           const Vec3& p) {
  const Vec3 c = camera.to_camera(p);
  if (!(c.z() > 0.0)) return std::nullopt;
  const Vec2 n = camera.ndc(c);
  constexpr double lim = 1.0 + kFrustumTolerance;
  if (std::abs(n.x()) > lim || std::abs(n.y()) > lim) return std::nullopt;
  return pixel_from_ndc(n, width, height);
}

std::vector<uint32_t> raster_occlusion_filter(const PointCloud& cloud,
                                              std::span<const uint32_t> points,
                                              const DepthBuffer& depth, const Camera& camera,
                                              double epsilon) {
  std::vector<uint32_t> out;
  for (uint32_t i : points) {
    const Vec3 p = cloud.positions[i].cast<double>();
    const auto px = pixel_of(camera, depth.width, depth.height, p);
    if (!px) continue;
    // Planar depth converted to a distance along the point's own ray.
    const Vec3 c = camera.to_camera(p);
    const double dist = c.norm();
    const double hit = static_cast<double>(depth.at((*px)[0], (*px)[1])) * dist / c.z();
    if (keep_by_distance(hit, dist, epsilon)) out.push_back(i);
  }
  return out;
}

uint8_t sparsity_bin(uint32_t count) {
  // floor(count / (2^14 / 5)) == floor(5 * count / 2^14), exact in integers.
  const uint64_t bin = (5ULL * count) / kMaxSparsityCount;
  return static_cast<uint8_t>(std::min<uint64_t>(bin, kNumSparsityBins - 1));
}

Camera make_camera(const AgentState& state, const RenderConfig& config) {
  Camera cam;
  cam.position = Vec3(state.position.x(), state.position.y(), config.eye_height);
  cam.yaw = state.heading;
  cam.pitch = config.pitch;
  cam.vertical_fov = config.vertical_fov;
  cam.aspect = config.aspect;
  cam.near = config.near;
  cam.far = config.far;
  cam.validate();
  return cam;
}

Renderer::Renderer(const env::Environment& env, double cell_size) : env_(&env), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw ConfigError("render cell size must be positive");
  std::map<std::array<int64_t, 3>, std::size_t> index;
  const auto& pts = env.global_cloud.positions;
  for (uint32_t i = 0; i < pts.size(); ++i) {
    const Vec3 p = pts[i].cast<double>();
    const std::array<int64_t, 3> key{static_cast<int64_t>(std::floor(p.x() / cell_size)),
                                     static_cast<int64_t>(std::floor(p.y() / cell_size)),
                                     static_cast<int64_t>(std::floor(p.z() / cell_size))};
    auto [it, inserted] = index.try_emplace(key, cells_.size());
    if (inserted) cells_.push_back(Cell{p, p, {}});
    Cell& c = cells_[it->second];
    c.lo = c.lo.cwiseMin(p);
    c.hi = c.hi.cwiseMax(p);
    c.members.push_back(i);
  }
}

bool Renderer::cell_may_be_visible(const Cell& cell, const Camera& camera, const DepthBuffer* depth,
                                   double epsilon) const {
  std::array<Vec3, 8> cam;
  for (int k = 0; k < 8; ++k) {
    const Vec3 w((k & 1) ? cell.hi.x() : cell.lo.x(), (k & 2) ? cell.hi.y() : cell.lo.y(),
                 (k & 4) ? cell.hi.z() : cell.lo.z());
    cam[k] = camera.to_camera(w);
  }
  // Conservative frustum rejection: all corners outside one plane.
  const double kh = camera.tan_half_h() * (1.0 + kFrustumTolerance);
  const double kv = camera.tan_half_v() * (1.0 + kFrustumTolerance);
  constexpr double slack = 1e-6;
  auto all = [&](auto pred) { return std::all_of(cam.begin(), cam.end(), pred); };
  if (all([&](const Vec3& c) { return c.z() < camera.near - slack; })) return false;
  if (all([&](const Vec3& c) { return c.z() > camera.far + slack; })) return false;
  if (all([&](const Vec3& c) { return c.x() - kh * c.z() > slack; })) return false;
  if (all([&](const Vec3& c) { return -c.x() - kh * c.z() > slack; })) return false;
  if (all([&](const Vec3& c) { return c.y() - kv * c.z() > slack; })) return false;
  if (all([&](const Vec3& c) { return -c.y() - kv * c.z() > slack; })) return false;
  if (!depth) return true;

  // Depth-buffer test over the screen bound of the cell.
  if (!all([](const Vec3& c) { return c.z() > 1e-6; })) return true;
  // A kept point at camera depth z needs a buffer value within z +- epsilon.
  Vec2 lo(kInf, kInf), hi(-kInf, -kInf);
  double zmin = kInf, zmax = 0.0;
  for (const Vec3& c : cam) {
    const Vec2 n = camera.ndc(c);
    lo = lo.cwiseMin(n);
    hi = hi.cwiseMax(n);
    zmin = std::min(zmin, c.z());
    zmax = std::max(zmax, c.z());
  }
  const auto a = pixel_from_ndc(Vec2(lo.x(), hi.y()), depth->width, depth->height);
  const auto b = pixel_from_ndc(Vec2(hi.x(), lo.y()), depth->width, depth->height);
  const double lo_ok = zmin - epsilon - slack;
  const double hi_ok = zmax + epsilon + slack;
  for (int py = a[1]; py <= b[1]; ++py) {
    for (int px = a[0]; px <= b[0]; ++px) {
      const double d = depth->at(px, py);
      if (d >= lo_ok && d <= hi_ok) return true;
    }
  }
  return false;
}

std::vector<uint32_t> Renderer::visible_bruteforce(const Camera& camera,
                                                   const RenderConfig& config) const {
  const auto culled = frustum_cull(env_->global_cloud, camera);
  if (config.mode == OcclusionMode::Ray) {
    return ray_occlusion_filter(env_->global_cloud, culled, env_->surfaces, camera, config.epsilon);
  }
  const DepthBuffer depth =
      raster_depth_buffer(env_->surfaces, camera, config.raster_width, config.raster_height);
  return raster_occlusion_filter(env_->global_cloud, culled, depth, camera, config.epsilon);
}

std::vector<uint32_t> Renderer::visible_two_pass(const Camera& camera, const RenderConfig& config,
                                                 RenderStats* stats) const {
  camera.validate();
  std::optional<DepthBuffer> depth;
  if (config.mode == OcclusionMode::Raster) {
    depth = raster_depth_buffer(env_->surfaces, camera, config.raster_width, config.raster_height);
  }
  const auto& cloud = env_->global_cloud;
  std::vector<uint32_t> out;
  RenderStats local;
  local.cells_total = cells_.size();
  for (const Cell& cell : cells_) {
    if (!cell_may_be_visible(cell, camera, depth ? &*depth : nullptr, config.epsilon)) continue;
    ++local.cells_checked;
    local.points_tested += cell.members.size();
    const auto culled = frustum_cull(cloud, cell.members, camera);
    const auto kept =
        depth ? raster_occlusion_filter(cloud, culled, *depth, camera, config.epsilon)
              : ray_occlusion_filter(cloud, culled, env_->surfaces, camera, config.epsilon);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  std::sort(out.begin(), out.end());
  if (stats) *stats = local;
  return out;
}

Observation Renderer::render(const AgentState& state, const RenderConfig& config,
                             RenderStats* stats) const {
  if (!env_->bounds.footprint().contains(state.position)) {
    throw DataError("agent pose lies outside the environment bounds");
  }
  Observation obs;
  obs.camera = make_camera(state, config);
  std::vector<uint32_t> visible = config.two_pass ? visible_two_pass(obs.camera, config, stats)
                                                  : visible_bruteforce(obs.camera, config);
  obs.visible_count = static_cast<uint32_t>(visible.size());
  if (config.max_points > 0 && visible.size() > config.max_points) {
    std::string key(3 * sizeof(double), '\0');
    const double pose[3] = {state.position.x(), state.position.y(), state.heading};
    std::memcpy(key.data(), pose, sizeof(pose));
    Rng rng(mix_seed(config.seed, fnv1a64(key)));
    for (std::size_t i = 0; i < config.max_points; ++i) {
      const std::size_t j = i + rng.uniform_int(visible.size() - i);
      std::swap(visible[i], visible[j]);
    }
    visible.resize(config.max_points);
    std::sort(visible.begin(), visible.end());
  }
  const auto& cloud = env_->global_cloud;
  obs.cloud.reserve(visible.size());
  obs.camera_points.reserve(visible.size());
  for (uint32_t i : visible) {
    obs.cloud.push_back(cloud.positions[i], cloud.colors[i], cloud.semantic[i]);
    obs.camera_points.push_back(obs.camera.to_camera(cloud.positions[i].cast<double>()).cast<float>());
  }
  obs.source_indices = std::move(visible);
  obs.sparsity_bin = sparsity_bin(static_cast<uint32_t>(obs.cloud.size()));
  obs.kept_fraction =
      obs.visible_count == 0 ? 1.0 : static_cast<double>(obs.cloud.size()) / obs.visible_count;
  obs.point_spacing = 1.0 / std::sqrt(env_->point_density * obs.kept_fraction);
  return obs;
}

std::vector<uint32_t> Renderer::visible_subset(const Camera& camera, const RenderConfig& config,
                                               std::span<const uint32_t> subset) const {
  const auto& cloud = env_->global_cloud;
  const auto culled = frustum_cull(cloud, subset, camera);
  if (culled.empty()) return culled;
  if (config.mode == OcclusionMode::Ray) {
    return ray_occlusion_filter(cloud, culled, env_->surfaces, camera, config.epsilon);
  }
  const DepthBuffer depth =
      raster_depth_buffer(env_->surfaces, camera, config.raster_width, config.raster_height);
  return raster_occlusion_filter(cloud, culled, depth, camera, config.epsilon);
}

Observation render_observation(const env::Environment& env, const AgentState& state,
                               const RenderConfig& config) {
  return Renderer(env, config.cell_size).render(state, config);
}

void save_observation(const Observation& obs, const AgentState& pose, const std::string& cloud_path,
                      const std::string& json_path) {
  env::write_cloud(cloud_path, obs.cloud);
  nlohmann::json j;
  j["pose"] = {{"x", pose.position.x()}, {"y", pose.position.y()}, {"heading", pose.heading}};
  j["bin"] = obs.sparsity_bin;
  j["count"] = obs.cloud.size();
  j["visible_count"] = obs.visible_count;
  j["cloud"] = std::filesystem::path(cloud_path).filename().string();
  env::write_text_file(json_path, j.dump(1) + "\n");
}

}  // namespace eqa::render
