#include "eqa/env_model.hpp"
#include "eqa/pathfind.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/pointnet_ops.hpp"
#include "eqa/policy.hpp"
#include "eqa/rng.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

using namespace eqa;

namespace {

const env::Environment& bench_env() {
  static const auto e = env::generate_environment(env::EnvGenSpec{}, 5);
  return e;
}

AgentState free_pose(const env::Environment& e, uint64_t seed) {
  const auto grid = env::occupancy_grid(e, 0.05, 0.1);
  Rng rng(seed);
  AgentState s;
  do {
    s.position = Vec2(rng.uniform(e.bounds.lo.x(), e.bounds.hi.x()),
                      rng.uniform(e.bounds.lo.y(), e.bounds.hi.y()));
  } while (!grid.is_free(s.position));
  s.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return s;
}

void BM_Render(benchmark::State& state) {
  const render::Renderer r(bench_env());
  render::RenderConfig cfg;
  cfg.mode = state.range(0) == 0 ? render::OcclusionMode::Raster : render::OcclusionMode::Ray;
  const auto pose = free_pose(bench_env(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(r.render(pose, cfg));
}
BENCHMARK(BM_Render)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FarthestPointSample(benchmark::State& state) {
  Rng rng(1);
  std::vector<Vec3f> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = Vec3(rng.uniform(), rng.uniform(), rng.uniform()).cast<float>();
  for (auto _ : state) benchmark::DoNotOptimize(pointnet::farthest_point_sample(pts, pts.size() / 4, 0));
}
BENCHMARK(BM_FarthestPointSample)->Arg(1024)->Arg(1 << 14)->Unit(benchmark::kMillisecond);

void BM_LazyThetaStar(benchmark::State& state) {
  const auto& e = bench_env();
  const auto grid = env::occupancy_grid(e, 0.05, 0.2);
  const auto a = free_pose(e, 11).position, b = free_pose(e, 12).position;
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(path::lazy_theta_star(grid, a, b));
    } catch (const std::exception&) {
      state.SkipWithError("no path between the benchmark endpoints");
      break;
    }
  }
}
BENCHMARK(BM_LazyThetaStar)->Unit(benchmark::kMillisecond);

void BM_PolicyStep(benchmark::State& state) {
  imitation::PolicyConfig pc;
  pc.kind = state.range(0) == 0 ? imitation::PolicyKind::Memory : imitation::PolicyKind::Reactive;
  const auto p = imitation::Policy::random(pc, 1);
  auto st = p.initial_state();
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(pc.feature_dim);
  for (auto _ : state) benchmark::DoNotOptimize(p.step(st, x));
}
BENCHMARK(BM_PolicyStep)->Arg(0)->Arg(1);

}  // namespace
BENCHMARK_MAIN();
