#pragma once

#include "eqa/agent.hpp"
#include "eqa/episodes.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/pointnet_ops.hpp"

#include <Eigen/Core>

#include <optional>

namespace eqa::imitation {

struct FeatureConfig {
  double corridor_half_width = 0.15;
  double max_range = 3.0;   // forward distance cap (m)
  double side_range = 1.5;  // side clearance cap (m)
  double floor_height = 0.02;
  int bearing_bins = 8;

  void validate() const;
  // sparsity (5) + forward + left/right + visible + bearing bins + IoU + previous action (4)
  int dim() const { return render::kNumSparsityBins + 1 + 2 + 1 + bearing_bins + 1 + kNumActions; }
};

// Step features computed from the observation alone plus the question's
// target id and the previous action (all zeros when there is none).
Eigen::VectorXd handcrafted_features(const render::Observation& obs, const AgentState& state,
                                     uint32_t target_id, std::optional<Action> previous,
                                     const FeatureConfig& config,
                                     const episodes::ViewConfig& view);

// Encoder embedding followed by the previous-action one-hot.
Eigen::VectorXd embedding_features(const render::Observation& obs, std::optional<Action> previous,
                                   const pointnet::EncoderConfig& config,
                                   const pointnet::EncoderWeights& weights);

}  // namespace eqa::imitation
