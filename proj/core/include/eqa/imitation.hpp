#pragma once

#include "eqa/agent.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace eqa::imitation {

struct InflectionStats {
  uint64_t total_steps = 0;
  uint64_t inflection_count = 0;
  double ratio = 1.0;  // total_steps / inflection_count
};

// Step t is an inflection when t == 0 or actions[t] != actions[t - 1].
bool is_inflection(std::span<const Action> actions, std::size_t t);

// ratio at inflections, 1 elsewhere. Throws ConfigError for ratio < 1 or an
// empty sequence.
std::vector<double> inflection_weights(std::span<const Action> actions, double ratio);

// Throws ConfigError when there is no trajectory or no step at all.
InflectionStats inflection_ratio(const std::vector<std::vector<Action>>& trajectories);

// Cross-entropy of one logit column against an action.
double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, Action target);

struct LossTerms {
  double loss = 0.0;
  std::vector<double> per_step;  // unweighted cross-entropy per step
};

// (1 / sum w) * sum w_t CE(logits_t, a_t). Logits are kNumActions x T.
LossTerms iw_loss(const Eigen::MatrixXd& logits, std::span<const Action> actions,
                  std::span<const double> weights);

// d iw_loss / d logits (kNumActions x T).
Eigen::MatrixXd iw_loss_gradient(const Eigen::MatrixXd& logits, std::span<const Action> actions,
                                 std::span<const double> weights);

struct ActionAccuracy {
  uint64_t steps = 0;
  uint64_t correct = 0;
  uint64_t inflections = 0;  // inflection steps after the first step
  uint64_t inflections_correct = 0;

  double accuracy() const { return steps ? static_cast<double>(correct) / steps : 0.0; }
  // Recall on inflections; first steps are excluded because nothing precedes them.
  double inflection_recall() const {
    return inflections ? static_cast<double>(inflections_correct) / inflections : 0.0;
  }
  void add(std::span<const Action> truth, std::span<const Action> predicted);
};

// Predicts the previous ground-truth action, and `first` at t = 0.
ActionAccuracy repeat_previous_oracle(const std::vector<std::vector<Action>>& trajectories,
                                      Action first = Action::Forward);

}  // namespace eqa::imitation
