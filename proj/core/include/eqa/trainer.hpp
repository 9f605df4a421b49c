#pragma once

#include "eqa/dataset.hpp"
#include "eqa/episodes.hpp"
#include "eqa/features.hpp"
#include "eqa/imitation.hpp"
#include "eqa/policy.hpp"

#include <map>
#include <string>
#include <vector>

namespace eqa::imitation {

struct FeaturePipeline {
  FeatureConfig features;
  episodes::ViewConfig view;
  render::RenderConfig render;
};

// Features of the expert states 0..T-1 of an episode (D x T); column t uses
// the expert's previous action.
Eigen::MatrixXd episode_features(const episodes::Scene& scene, const episodes::Episode& episode,
                                 const FeaturePipeline& pipeline);

using FeatureCache = std::map<std::string, Eigen::MatrixXd>;  // episode id -> features

// Features for many episodes, computed with `jobs` workers.
FeatureCache compute_features(const episodes::Dataset& dataset,
                              const std::vector<const episodes::Episode*>& episodes,
                              const FeaturePipeline& pipeline, unsigned jobs);

struct TrainConfig {
  int epochs = 40;
  int batch_size = 8;
  double learning_rate = 0.0;  // 0 selects 2e-4 for memory, 1e-3 for reactive
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double grad_clip = 5.0;  // global norm, 0 disables
  bool inflection_weighting = true;
  double inflection_ratio = 0.0;  // 0 measures it on the training set
  uint64_t seed = 7;

  void validate() const;
  double effective_learning_rate(PolicyKind kind) const;
};

class Adam {
 public:
  Adam(Eigen::Index size, double lr, double beta1, double beta2, double epsilon);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

struct SequenceStats {
  double iw_loss = 0.0;     // mean per-sequence weighted loss
  double plain_loss = 0.0;  // mean per-sequence unweighted loss
  ActionAccuracy accuracy;  // teacher-forced argmax predictions
};

// Teacher-forced evaluation of a policy on sequences; weights use `ratio`.
SequenceStats evaluate_sequences(const Policy& policy, const std::vector<Sequence>& sequences,
                                 double ratio);

struct EpochStats {
  int epoch = 0;
  SequenceStats train;
  SequenceStats val;
};

struct TrainResult {
  Policy policy;
  std::vector<EpochStats> curve;
  double inflection_ratio = 1.0;
};

// Builds Sequence objects (weights left empty) from cached features.
std::vector<Sequence> make_sequences(const std::vector<const episodes::Episode*>& episodes,
                                     const FeatureCache& cache);

// Seeded minibatch Adam on the inflection-weighted (or plain) loss. Throws
// InvariantError when the loss becomes non-finite.
TrainResult train(const std::vector<Sequence>& train_set, const std::vector<Sequence>& val_set,
                  const PolicyConfig& policy_config, const TrainConfig& config);

std::string curve_to_csv(const std::vector<EpochStats>& curve);

}  // namespace eqa::imitation
