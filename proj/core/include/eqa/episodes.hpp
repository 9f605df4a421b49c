#pragma once

#include "eqa/agent.hpp"
#include "eqa/env_model.hpp"
#include "eqa/pathfind.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/questions.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace eqa::episodes {

struct SceneConfig {
  double grid_resolution = 0.05;
  double agent_radius = 0.1;
  // Extra clearance for expert planning and candidate views.
  double planning_clearance = 0.1;
  double cell_size = 0.25;  // renderer cells
};

// An environment with everything derived from it that navigation needs.
class Scene {
 public:
  Scene(env::Environment env, const SceneConfig& config);

  const env::Environment& env() const { return *env_; }
  const render::Renderer& renderer() const { return *renderer_; }
  const env::OccupancyGrid& agent_grid() const { return agent_grid_; }
  const env::OccupancyGrid& planning_grid() const { return planning_grid_; }
  const SceneConfig& config() const { return config_; }

  // Free planning-grid cells of the largest 4-connected component.
  const std::vector<std::array<int, 2>>& spawn_cells() const { return spawn_cells_; }
  bool in_main_component(const Vec2& p) const;

  // Global-cloud indices labelled with `object_id`.
  const std::vector<uint32_t>& object_points(uint32_t object_id) const;

  // Memoized geodesic distance on the agent grid.
  double geodesic(const Vec2& a, const Vec2& b) const;

 private:
  std::unique_ptr<env::Environment> env_;
  std::unique_ptr<render::Renderer> renderer_;
  SceneConfig config_;
  env::OccupancyGrid agent_grid_;
  env::OccupancyGrid planning_grid_;
  std::vector<int> planning_labels_;
  int main_label_ = -1;
  std::vector<std::array<int, 2>> spawn_cells_;
  std::map<uint32_t, std::vector<uint32_t>> object_points_;
  mutable std::mutex geo_mutex_;
  mutable std::map<std::array<double, 4>, double> geo_cache_;
};

struct ViewConfig {
  int mask_resolution = 40;
  // Target box in normalized image coordinates (u right, v down).
  double box_u0 = 0.25;
  double box_v0 = 0.25;
  double box_width = 0.5;
  double box_height = 0.6;
  double radius = 1.5;
  double pos_step = 0.25;
  double ang_step = 0.5235987755982988;  // 30 degrees

  void validate() const;
};

// Occupancy mask of the target in normalized image coordinates, row-major
// with row 0 at the top. Each point covers a square of its sample spacing.
std::vector<uint8_t> target_mask(const render::Observation& obs, uint32_t target_id,
                                 const ViewConfig& config);
// IoU of a mask with the fixed box, using exact cell/box overlap areas.
double mask_iou(const std::vector<uint8_t>& mask, const ViewConfig& config);
double view_iou(const render::Observation& obs, uint32_t target_id, const ViewConfig& config);

struct ScoredView {
  AgentState pose;
  double iou = 0.0;
  double distance = 0.0;  // to the target box centre
};

// view_iou of the rendered observation at `pose`, computed from the target's
// points only. Equal to view_iou(render(pose)) whenever the cap is inactive.
double score_view(const Scene& scene, uint32_t target_id, const AgentState& pose,
                  const ViewConfig& view, const render::RenderConfig& render);

// Lattice poses (anchored at the environment's lower corner) within `radius`
// of the target centre that lie in the main planning component, times every
// heading multiple of ang_step. Ordered by x, then y, then heading.
std::vector<ScoredView> candidate_views(const Scene& scene, uint32_t target_id,
                                        const ViewConfig& view, const render::RenderConfig& render);

// Highest IoU; ties by smaller distance, then lower heading. Throws
// GenerationError for an empty list or when nothing scores above zero.
ScoredView best_view(const std::vector<ScoredView>& candidates);

inline constexpr std::array<int, 3> kEvalOffsets{10, 30, 50};
// Number of final expert states whose best IoU normalizes IoU_T.
inline constexpr int kIouWindow = 5;

struct Episode {
  std::string episode_id;
  std::string env_id;
  Question question;
  uint64_t spawn_seed = 0;
  AgentState spawn;
  std::vector<Action> expert_actions;      // ends with Stop
  std::vector<AgentState> expert_states;   // expert_actions.size() + 1
  AgentState best_view;
  double best_view_iou = 0.0;
  // Best IoU over the last kIouWindow expert states; the IoU_T normalizer.
  double expert_iou = 0.0;
  std::map<int, double> d0_cache;          // offset -> geodesic distance

  std::size_t length() const { return expert_actions.size(); }
};

struct EpisodeConfig {
  MotionConfig motion;
  ViewConfig view;
  render::RenderConfig render;
  double hold_tolerance = 2.5;  // follower, in turn angles
  bool shortcut = true;         // follower skips to visible planning waypoints
};

// Deterministic in (scene, question, spawn_seed, config, best view).
Episode generate_episode(const Scene& scene, const Question& question, const ScoredView& best,
                         uint64_t spawn_seed, const EpisodeConfig& config);

// Checks collision-free replay, final-pose tolerance and length bookkeeping.
// Throws InvariantError on violation.
void validate_episode(const Scene& scene, const Episode& episode, const MotionConfig& motion);

std::string episode_to_json(const Episode& episode);
Episode episode_from_json(const std::string& line);
void write_episodes_jsonl(const std::string& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_episodes_jsonl(const std::string& path);

}  // namespace eqa::episodes
