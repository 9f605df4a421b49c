#include "eqa/features.hpp"

#include "eqa/error.hpp"

#include <algorithm>
#include <cmath>

namespace eqa::imitation {

void FeatureConfig::validate() const {
  if (!(corridor_half_width > 0.0 && max_range > 0.0 && side_range > 0.0)) {
    throw ConfigError("feature ranges must be positive");
  }
  if (bearing_bins < 1) throw ConfigError("bearing_bins must be >= 1");
}

Eigen::VectorXd handcrafted_features(const render::Observation& obs, const AgentState& state,
                                     uint32_t target_id, std::optional<Action> previous,
                                     const FeatureConfig& cfg, const episodes::ViewConfig& view) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(cfg.dim());
  int k = 0;
  f[k + obs.sparsity_bin] = 1.0;
  k += render::kNumSparsityBins;

  const Vec2 dir = state.direction();
  const Vec2 perp(-dir.y(), dir.x());  // left of the heading
  const double half_fov = std::atan(obs.camera.tan_half_h());
  constexpr double side_lo = 10.0 * std::numbers::pi / 180.0;
  double forward = cfg.max_range, left = cfg.side_range, right = cfg.side_range;
  Vec2 target_sum = Vec2::Zero();
  int target_n = 0;
  for (std::size_t i = 0; i < obs.cloud.size(); ++i) {
    const Vec3f& p = obs.cloud.positions[i];
    const Vec2 rel = Vec2(p.x(), p.y()) - state.position;
    if (target_id != 0 && obs.cloud.semantic[i] == target_id) {
      target_sum += rel;
      ++target_n;
    }
    if (p.z() < cfg.floor_height) continue;
    const double along = rel.dot(dir);
    const double lateral = rel.dot(perp);
    if (along > 0.0 && std::abs(lateral) <= cfg.corridor_half_width) {
      forward = std::min(forward, along);
    }
    const double bearing = std::atan2(lateral, along);
    const double dist = rel.norm();
    if (bearing >= side_lo) left = std::min(left, dist);
    if (bearing <= -side_lo) right = std::min(right, dist);
  }
  f[k++] = forward / cfg.max_range;
  f[k++] = left / cfg.side_range;
  f[k++] = right / cfg.side_range;
  f[k++] = target_n > 0 ? 1.0 : 0.0;
  if (target_n > 0) {
    const Vec2 c = target_sum / target_n;
    const double bearing = std::atan2(c.dot(perp), c.dot(dir));
    const int bin = std::clamp(
        static_cast<int>(std::floor((bearing + half_fov) / (2.0 * half_fov) * cfg.bearing_bins)), 0,
        cfg.bearing_bins - 1);
    f[k + bin] = 1.0;
  }
  k += cfg.bearing_bins;
  f[k++] = target_n > 0 ? episodes::view_iou(obs, target_id, view) : 0.0;
  if (previous) f[k + static_cast<int>(*previous)] = 1.0;
  return f;
}

Eigen::VectorXd embedding_features(const render::Observation& obs, std::optional<Action> previous,
                                   const pointnet::EncoderConfig& config,
                                   const pointnet::EncoderWeights& weights) {
  const Eigen::VectorXf e = pointnet::encode_observation(obs, config, weights);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(e.size() + kNumActions);
  f.head(e.size()) = e.cast<double>();
  if (previous) f[e.size() + static_cast<int>(*previous)] = 1.0;
  return f;
}

}  // namespace eqa::imitation
