#include "eqa/env_model.hpp"
#include "eqa/error.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <set>

using namespace eqa;
using namespace eqa::render;

namespace {

Camera facing_x(double fov = std::numbers::pi / 2.0, double aspect = 1.0) {
  Camera c;
  c.position = Vec3::Zero();
  c.yaw = 0.0;
  c.pitch = 0.0;
  c.vertical_fov = fov;
  c.aspect = aspect;
  return c;
}

// Wall perpendicular to +x at distance d, large enough to fill any view.
Rect3 wall_x(double d, uint32_t owner = 0) {
  Rect3 r;
  r.axis = 0;
  r.offset = d;
  r.lo = Vec2(-50, -50);
  r.hi = Vec2(50, 50);
  r.owner = owner;
  return r;
}

env::PointCloud cloud_of(std::initializer_list<Vec3> pts) {
  env::PointCloud c;
  for (const auto& p : pts) c.push_back(p.cast<float>(), Rgb{0, 0, 0}, 0);
  return c;
}

std::vector<uint32_t> all_indices(const env::PointCloud& c) {
  std::vector<uint32_t> v(c.size());
  for (uint32_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

// Room-free scene: a wall ahead of the agent and an object face behind it.
env::Environment wall_scene() {
  env::Environment e;
  e.id = "wall";
  e.point_density = 400.0;
  Rect3 wall;
  wall.axis = 0;
  wall.offset = 1.0;
  wall.lo = Vec2(-3, 0);
  wall.hi = Vec2(3, 2.5);
  Rect3 behind;
  behind.axis = 0;
  behind.offset = 2.0;
  behind.lo = Vec2(-0.5, 0.5);
  behind.hi = Vec2(0.5, 1.5);
  behind.owner = 1;
  e.surfaces = {wall, behind};
  e.global_cloud = env::sample_surface_points(std::span<const Rect3>(e.surfaces), e.point_density, 3);
  e.bounds = Box3{Vec3(-3, -3, 0), Vec3(3, 3, 2.5)};
  return e;
}

}  // namespace

TEST(FrustumCull, AheadBehindAndBoundary) {
  const auto cam = facing_x();
  const auto cloud = cloud_of({Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(1, -1, 0), Vec3(1, 0, 1.0001)});
  const auto kept = frustum_cull(cloud, cam);
  EXPECT_EQ(kept, (std::vector<uint32_t>{0, 2}));
}

TEST(FrustumCull, CameraAxesAreRightHanded) {
  const Camera cam = facing_x();
  const Vec3 c = cam.to_camera(Vec3(2, -1, 0.5));
  EXPECT_NEAR(c.z(), 2.0, 1e-12);
  EXPECT_NEAR(c.x(), 1.0, 1e-12);
  EXPECT_NEAR(c.y(), 0.5, 1e-12);
}

TEST(RayOcclusion, VisibleOccludedAndFloated) {
  const std::vector<Rect3> occluder{wall_x(1.0)};
  const auto cam = facing_x();
  const auto cloud = cloud_of({Vec3(1, 0.2, 0.1), Vec3(3, 0, 0)});
  EXPECT_EQ(ray_occlusion_filter(cloud, all_indices(cloud), occluder, cam, 0.25),
            (std::vector<uint32_t>{0}));

  const std::vector<Rect3> far_wall{wall_x(2.0)};
  const auto floated = cloud_of({Vec3(1.99, 0, 0)});
  EXPECT_EQ(ray_occlusion_filter(floated, std::vector<uint32_t>{0}, far_wall, cam, 0.25).size(), 1u);
  EXPECT_TRUE(ray_occlusion_filter(floated, std::vector<uint32_t>{0}, far_wall, cam, 0.0025).empty());
}

TEST(RayOcclusion, FreeSpacePointRemoved) {
  const std::vector<Rect3> none;
  const auto cloud = cloud_of({Vec3(1, 0, 0)});
  EXPECT_TRUE(ray_occlusion_filter(cloud, all_indices(cloud), none, facing_x(), 0.25).empty());
}

TEST(DepthBuffer, WallAheadReadsPlanarDistance) {
  const std::vector<Rect3> s{wall_x(2.0)};
  const auto buf = raster_depth_buffer(s, facing_x(1.2, 4.0 / 3.0), 64, 48);
  for (float d : buf.depths) {
    ASSERT_TRUE(std::isfinite(d));
    EXPECT_NEAR(d, 2.0, 1e-5);
  }
}

TEST(DepthBuffer, EmptySceneIsInfinite) {
  const std::vector<Rect3> s;
  const auto buf = raster_depth_buffer(s, facing_x(), 16, 16);
  for (float d : buf.depths) EXPECT_TRUE(std::isinf(d));
}

TEST(DepthBuffer, NearestOfOverlappingWalls) {
  Rect3 near = wall_x(1.0);
  near.lo = Vec2(-0.2, -0.2);
  near.hi = Vec2(0.2, 0.2);
  const std::vector<Rect3> s{wall_x(3.0), near};
  const auto buf = raster_depth_buffer(s, facing_x(), 32, 32);
  EXPECT_NEAR(buf.at(15, 15), 1.0, 1e-6);
  EXPECT_NEAR(buf.at(16, 16), 1.0, 1e-6);
  EXPECT_NEAR(buf.at(0, 0), 3.0, 1e-5);
}

TEST(DepthBuffer, RejectsTinyBuffers) {
  const std::vector<Rect3> s;
  EXPECT_THROW(raster_depth_buffer(s, facing_x(), 4, 4), ConfigError);
}

TEST(RasterOcclusion, MatchesRayOracleOnBasicCases) {
  const auto cam = facing_x();
  const auto cloud = cloud_of({Vec3(1, 0.2, 0.1), Vec3(3, 0, 0), Vec3(1.99, 0.3, -0.2)});
  for (const auto& [walls, eps] :
       std::vector<std::pair<std::vector<Rect3>, double>>{{{wall_x(1.0)}, 0.25},
                                                           {{wall_x(2.0)}, 0.25},
                                                           {{wall_x(2.0)}, 0.0025}}) {
    const auto depth = raster_depth_buffer(walls, cam, 256, 256);
    EXPECT_EQ(raster_occlusion_filter(cloud, all_indices(cloud), depth, cam, eps),
              ray_occlusion_filter(cloud, all_indices(cloud), walls, cam, eps));
  }
}

TEST(RasterOcclusion, PointOutsideBufferRemoved) {
  const auto cam = facing_x();
  const std::vector<Rect3> walls{wall_x(1.0)};
  const auto depth = raster_depth_buffer(walls, cam, 16, 16);
  const auto cloud = cloud_of({Vec3(-1, 0, 0), Vec3(1, 5, 0)});
  EXPECT_TRUE(raster_occlusion_filter(cloud, all_indices(cloud), depth, cam, 0.25).empty());
  EXPECT_FALSE(pixel_of(cam, 16, 16, Vec3(-1, 0, 0)).has_value());
}

TEST(RasterOcclusion, CoarseRasterDisagreementIsMeasuredNotFatal) {
  // Grazing wall seen on an 8x8 raster.
  Rect3 side;
  side.axis = 1;
  side.offset = -0.3;
  side.lo = Vec2(0.1, -2);
  side.hi = Vec2(6, 2);
  const std::vector<Rect3> s{side, wall_x(6.0)};
  const auto cam = facing_x();
  const auto cloud = env::sample_surface_points(std::span<const Rect3>(s), 50.0, 1);
  const auto culled = frustum_cull(cloud, cam);
  const auto depth = raster_depth_buffer(s, cam, 8, 8);
  const auto raster = raster_occlusion_filter(cloud, culled, depth, cam, 0.25);
  const auto ray = ray_occlusion_filter(cloud, culled, s, cam, 0.25);
  const std::set<uint32_t> a(raster.begin(), raster.end()), b(ray.begin(), ray.end());
  std::size_t differ = 0;
  for (uint32_t i : culled) differ += a.contains(i) != b.contains(i);
  EXPECT_LE(differ, culled.size());
}

TEST(SparsityBin, Boundaries) {
  EXPECT_EQ(sparsity_bin(0), 0);
  EXPECT_EQ(sparsity_bin(3276), 0);
  EXPECT_EQ(sparsity_bin(3277), 1);
  EXPECT_EQ(sparsity_bin(5000), 1);
  EXPECT_EQ(sparsity_bin(1u << 14), 4);
  EXPECT_EQ(sparsity_bin(1u << 20), 4);
}

TEST(Render, WallAheadShowsOnlyThatWall) {
  const auto env = wall_scene();
  const Renderer r(env);
  RenderConfig cfg;
  cfg.max_points = 0;
  AgentState s;
  s.position = Vec2(0.5, 0.0);
  const auto obs = r.render(s, cfg);
  ASSERT_GT(obs.cloud.size(), 0u);
  for (std::size_t i = 0; i < obs.cloud.size(); ++i) {
    EXPECT_EQ(obs.cloud.semantic[i], 0u);
    EXPECT_NEAR(obs.cloud.positions[i].x(), 1.0f, 1e-6f);
  }
  EXPECT_EQ(obs.source_indices, r.visible_bruteforce(obs.camera, cfg));
}

TEST(Render, CapAndDeterminism) {
  const auto env = wall_scene();
  const Renderer r(env);
  RenderConfig cfg;
  cfg.max_points = 16;
  AgentState s;
  s.position = Vec2(-1.0, 0.3);
  s.heading = 0.1;
  const auto a = r.render(s, cfg);
  const auto b = r.render(s, cfg);
  EXPECT_EQ(a.cloud.size(), 16u);
  EXPECT_GT(a.visible_count, 16u);
  EXPECT_EQ(a.source_indices, b.source_indices);
  EXPECT_EQ(a.sparsity_bin, 0);
  EXPECT_THROW(r.render(AgentState{Vec2(10, 10), 0.0, 0}, cfg), DataError);
}

class TwoPassEquivalence : public ::testing::TestWithParam<OcclusionMode> {};

TEST_P(TwoPassEquivalence, EqualsDensePass) {
  const auto env = env::generate_environment(env::EnvGenSpec{}, 17);
  const Renderer r(env);
  const auto grid = env::occupancy_grid(env, 0.05, 0.1);
  RenderConfig cfg;
  cfg.mode = GetParam();
  Rng rng(4);
  std::size_t checked = 0, total = 0;
  for (int i = 0; i < 8; ++i) {
    AgentState s;
    do {
      s.position = Vec2(rng.uniform(env.bounds.lo.x(), env.bounds.hi.x()),
                        rng.uniform(env.bounds.lo.y(), env.bounds.hi.y()));
    } while (!grid.is_free(s.position));
    s.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto cam = make_camera(s, cfg);
    RenderStats stats;
    EXPECT_EQ(r.visible_two_pass(cam, cfg, &stats), r.visible_bruteforce(cam, cfg)) << "pose " << i;
    checked += stats.cells_checked;
    total += stats.cells_total;
  }
  EXPECT_LT(checked, total);
}

INSTANTIATE_TEST_SUITE_P(Modes, TwoPassEquivalence,
                         ::testing::Values(OcclusionMode::Raster, OcclusionMode::Ray));

TEST(Camera, ValidationRejectsBadIntrinsics) {
  Camera c = facing_x();
  c.near = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = facing_x();
  c.vertical_fov = std::numbers::pi;
  EXPECT_THROW(c.validate(), ConfigError);
}
