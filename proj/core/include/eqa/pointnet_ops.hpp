#pragma once

#include "eqa/geometry.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/tensor_io.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace eqa::pointnet {

// Points of one level. Features are stored one column per point.
struct LevelCloud {
  std::vector<Vec3f> positions;
  Eigen::MatrixXf features;  // D x N
  uint8_t level = 0;

  std::size_t size() const { return positions.size(); }
};

// One shared per-point layer: y = relu(W x + b).
struct Dense {
  Eigen::MatrixXf w;  // out x in
  Eigen::VectorXf b;
};
using Mlp = std::vector<Dense>;

struct SetAbstractionConfig {
  std::size_t centroids = 0;
  std::vector<double> radii;
  std::vector<std::vector<int>> mlps;  // one channel list per radius
};

struct EncoderConfig {
  int input_features = 3;  // RGB in [0, 1]
  std::size_t group_size = 32;
  std::vector<SetAbstractionConfig> levels;
  std::vector<int> global_mlp;
  int sparsity_dim = 32;

  // The three-level multi-scale encoder with 1024/256/64 centroids.
  static EncoderConfig standard();
  // A reduced configuration with the same structure for fast runs.
  static EncoderConfig small();

  void validate() const;
  int output_dim() const;  // last global channel + sparsity_dim
  // Feature width produced by level `i` (concatenated scale outputs).
  int level_channels(std::size_t i) const;
};

struct SetAbstractionWeights {
  std::vector<Mlp> scales;
};

struct EncoderWeights {
  std::vector<SetAbstractionWeights> levels;
  Mlp global;
  Eigen::MatrixXf sparsity_table;  // kNumSparsityBins x sparsity_dim

  static EncoderWeights random(const EncoderConfig& config, uint64_t seed);
  static EncoderWeights from_tensors(const EncoderConfig& config, const TensorMap& tensors);
  TensorMap to_tensors() const;
};

// Greedy maximin sampling starting at `start_index`; ties go to the lowest
// index. Throws ConfigError when k is 0 or exceeds the point count.
std::vector<uint32_t> farthest_point_sample(std::span<const Vec3f> positions, std::size_t k,
                                            std::size_t start_index);

// Index of the lexicographically smallest position (lowest index on ties).
std::size_t lexicographic_min_index(std::span<const Vec3f> positions);

// Up to max_k points within `radius` of the centroid, sorted by distance then
// index. When the ball is empty the nearest point is returned alone.
std::vector<uint32_t> ball_query(std::span<const Vec3f> positions, const Vec3f& centroid,
                                 double radius, std::size_t max_k);

// relu(W x + b) applied layer by layer to every column of x.
Eigen::MatrixXf apply_mlp(const Mlp& mlp, const Eigen::MatrixXf& x);

// Multi-scale set abstraction. Centroids come from FPS started at the
// lexicographically smallest point; with fewer points than centroids the
// sampled centroids are repeated cyclically.
LevelCloud set_abstraction(const LevelCloud& level, const SetAbstractionConfig& config,
                           const SetAbstractionWeights& weights, std::size_t group_size);

// Shared MLP over [xyz, features] of every point followed by a max-pool.
Eigen::VectorXf global_abstraction(const LevelCloud& level, const Mlp& mlp);

// Inverse-distance interpolation from the 3 nearest coarse points (fewer if
// the coarse level is smaller), optional skip concatenation, then the MLP.
// A coarse point closer than 1e-8 is copied instead of interpolated.
Eigen::MatrixXf feature_propagate(const LevelCloud& coarse, const LevelCloud& fine, bool use_skip,
                                  const Mlp& mlp);

// Level-0 cloud: camera-frame positions with RGB features scaled to [0, 1].
LevelCloud input_level(const render::Observation& obs);

// Global summary followed by the sparsity embedding of the observation.
Eigen::VectorXf encode_observation(const render::Observation& obs, const EncoderConfig& config,
                                   const EncoderWeights& weights);

}  // namespace eqa::pointnet
