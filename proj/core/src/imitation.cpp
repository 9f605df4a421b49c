#include "eqa/imitation.hpp"

#include "eqa/error.hpp"

#include <cmath>

namespace eqa::imitation {

bool is_inflection(std::span<const Action> actions, std::size_t t) {
  return t == 0 || actions[t] != actions[t - 1];
}

std::vector<double> inflection_weights(std::span<const Action> actions, double ratio) {
  if (actions.empty()) throw ConfigError("inflection_weights needs a non-empty action list");
  if (!(ratio >= 1.0)) throw ConfigError("inflection ratio must be >= 1");
  std::vector<double> w(actions.size());
  for (std::size_t t = 0; t < actions.size(); ++t) w[t] = is_inflection(actions, t) ? ratio : 1.0;
  return w;
}

InflectionStats inflection_ratio(const std::vector<std::vector<Action>>& trajectories) {
  if (trajectories.empty()) throw ConfigError("inflection_ratio needs at least one trajectory");
  InflectionStats s;
  for (const auto& a : trajectories) {
    s.total_steps += a.size();
    for (std::size_t t = 0; t < a.size(); ++t) s.inflection_count += is_inflection(a, t) ? 1 : 0;
  }
  if (s.inflection_count == 0) throw ConfigError("inflection_ratio needs at least one step");
  s.ratio = static_cast<double>(s.total_steps) / static_cast<double>(s.inflection_count);
  return s;
}

double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, Action target) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits[static_cast<int>(target)];
}

namespace {

void check_lengths(const Eigen::MatrixXd& logits, std::span<const Action> actions,
                   std::span<const double> weights) {
  if (logits.rows() != kNumActions) throw ConfigError("logits must have one row per action");
  if (static_cast<std::size_t>(logits.cols()) != actions.size() || actions.size() != weights.size()) {
    throw ConfigError("iw_loss: logits, actions and weights differ in length");
  }
  if (actions.empty()) throw ConfigError("iw_loss: empty sequence");
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("iw_loss: weights must be positive");
  }
}

}  // namespace

LossTerms iw_loss(const Eigen::MatrixXd& logits, std::span<const Action> actions,
                  std::span<const double> weights) {
  check_lengths(logits, actions, weights);
  LossTerms out;
  out.per_step.resize(actions.size());
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    out.per_step[t] = cross_entropy(logits.col(static_cast<Eigen::Index>(t)), actions[t]);
    num += weights[t] * out.per_step[t];
    den += weights[t];
  }
  out.loss = num / den;
  return out;
}

Eigen::MatrixXd iw_loss_gradient(const Eigen::MatrixXd& logits, std::span<const Action> actions,
                                 std::span<const double> weights) {
  check_lengths(logits, actions, weights);
  double den = 0.0;
  for (double w : weights) den += w;
  Eigen::MatrixXd g(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const Eigen::VectorXd e = (logits.col(t).array() - logits.col(t).maxCoeff()).exp();
    Eigen::VectorXd p = e / e.sum();
    p[static_cast<int>(actions[t])] -= 1.0;
    g.col(t) = (weights[t] / den) * p;
  }
  return g;
}

void ActionAccuracy::add(std::span<const Action> truth, std::span<const Action> predicted) {
  if (truth.size() != predicted.size()) throw ConfigError("accuracy: length mismatch");
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const bool ok = truth[t] == predicted[t];
    ++steps;
    correct += ok ? 1 : 0;
    if (t > 0 && is_inflection(truth, t)) {
      ++inflections;
      inflections_correct += ok ? 1 : 0;
    }
  }
}

ActionAccuracy repeat_previous_oracle(const std::vector<std::vector<Action>>& trajectories,
                                      Action first) {
  ActionAccuracy acc;
  for (const auto& a : trajectories) {
    std::vector<Action> pred(a.size());
    for (std::size_t t = 0; t < a.size(); ++t) pred[t] = t == 0 ? first : a[t - 1];
    acc.add(a, pred);
  }
  return acc;
}

}  // namespace eqa::imitation
