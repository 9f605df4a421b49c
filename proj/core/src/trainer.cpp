#include "eqa/trainer.hpp"

#include "eqa/dataset.hpp"
#include "eqa/error.hpp"
#include "eqa/parallel.hpp"
#include "eqa/rng.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace eqa::imitation {

Eigen::MatrixXd episode_features(const episodes::Scene& scene, const episodes::Episode& ep,
                                 const FeaturePipeline& p) {
  const auto T = static_cast<Eigen::Index>(ep.expert_actions.size());
  Eigen::MatrixXd out(p.features.dim(), T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& s = ep.expert_states[static_cast<std::size_t>(t)];
    const auto obs = scene.renderer().render(s, p.render);
    const std::optional<Action> prev =
        t == 0 ? std::nullopt : std::optional<Action>(ep.expert_actions[static_cast<std::size_t>(t - 1)]);
    out.col(t) = handcrafted_features(obs, s, ep.question.target_object_id, prev, p.features, p.view);
  }
  return out;
}

FeatureCache compute_features(const episodes::Dataset& dataset,
                              const std::vector<const episodes::Episode*>& eps,
                              const FeaturePipeline& pipeline, unsigned jobs) {
  std::vector<Eigen::MatrixXd> feats(eps.size());
  parallel_for(eps.size(), jobs, [&](std::size_t i) {
    feats[i] = episode_features(dataset.scene(eps[i]->env_id), *eps[i], pipeline);
  });
  FeatureCache cache;
  for (std::size_t i = 0; i < eps.size(); ++i) cache[eps[i]->episode_id] = std::move(feats[i]);
  return cache;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_epsilon > 0.0)) {
    throw ConfigError("invalid Adam hyper-parameters");
  }
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
  if (inflection_ratio != 0.0 && inflection_ratio < 1.0) {
    throw ConfigError("inflection_ratio must be 0 (measure) or >= 1");
  }
}

double TrainConfig::effective_learning_rate(PolicyKind kind) const {
  if (learning_rate > 0.0) return learning_rate;
  return kind == PolicyKind::Memory ? 2e-4 : 1e-3;
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double epsilon)
    : m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

SequenceStats evaluate_sequences(const Policy& policy, const std::vector<Sequence>& seqs,
                                 double ratio) {
  SequenceStats s;
  if (seqs.empty()) return s;
  for (const auto& seq : seqs) {
    const Eigen::MatrixXd logits = policy.forward(seq.features);
    const auto w = inflection_weights(seq.actions, ratio);
    const auto terms = iw_loss(logits, seq.actions, w);
    s.iw_loss += terms.loss;
    s.plain_loss += std::accumulate(terms.per_step.begin(), terms.per_step.end(), 0.0) /
                    static_cast<double>(terms.per_step.size());
    std::vector<Action> pred(seq.actions.size());
    for (Eigen::Index t = 0; t < logits.cols(); ++t) {
      Eigen::Index k = 0;
      logits.col(t).maxCoeff(&k);
      pred[static_cast<std::size_t>(t)] = static_cast<Action>(k);
    }
    s.accuracy.add(seq.actions, pred);
  }
  s.iw_loss /= static_cast<double>(seqs.size());
  s.plain_loss /= static_cast<double>(seqs.size());
  return s;
}

std::vector<Sequence> make_sequences(const std::vector<const episodes::Episode*>& eps,
                                     const FeatureCache& cache) {
  std::vector<Sequence> out;
  out.reserve(eps.size());
  for (const auto* ep : eps) {
    const auto it = cache.find(ep->episode_id);
    if (it == cache.end()) throw DataError("no features cached for episode " + ep->episode_id);
    out.push_back({it->second, ep->expert_actions, {}});
  }
  return out;
}

TrainResult train(const std::vector<Sequence>& train_set, const std::vector<Sequence>& val_set,
                  const PolicyConfig& policy_config, const TrainConfig& config) {
  config.validate();
  policy_config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");

  TrainResult result;
  if (config.inflection_ratio > 0.0) {
    result.inflection_ratio = config.inflection_ratio;
  } else {
    std::vector<std::vector<Action>> trajectories;
    for (const auto& s : train_set) trajectories.push_back(s.actions);
    result.inflection_ratio = inflection_ratio(trajectories).ratio;
  }

  std::vector<Sequence> seqs = train_set;
  for (auto& s : seqs) {
    if (s.features.rows() != policy_config.feature_dim) {
      throw ConfigError("training features do not match the policy input dimension");
    }
    s.weights = config.inflection_weighting ? inflection_weights(s.actions, result.inflection_ratio)
                                            : std::vector<double>(s.actions.size(), 1.0);
  }

  Rng rng(config.seed);
  result.policy = Policy::random(policy_config, mix_seed(config.seed, 0xB01C));
  Adam adam(result.policy.params().size(), config.effective_learning_rate(policy_config.kind),
            config.beta1, config.beta2, config.adam_epsilon);
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      std::vector<const Sequence*> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + config.batch_size); ++k) {
        batch.push_back(&seqs[order[k]]);
      }
      const double loss = batch_loss_and_gradient(result.policy, batch, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", batch " << b / config.batch_size
            << " (loss " << loss << ", parameter norm " << result.policy.params().norm() << ")";
        throw InvariantError(msg.str());
      }
      if (config.grad_clip > 0.0) {
        const double n = grad.norm();
        if (n > config.grad_clip) grad *= config.grad_clip / n;
      }
      adam.step(result.policy.params(), grad);
    }
    EpochStats e;
    e.epoch = epoch;
    e.train = evaluate_sequences(result.policy, train_set, result.inflection_ratio);
    e.val = evaluate_sequences(result.policy, val_set, result.inflection_ratio);
    result.curve.push_back(e);
  }
  return result;
}

std::string curve_to_csv(const std::vector<EpochStats>& curve) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "epoch,split,iw_loss,plain_loss,accuracy,inflection_recall\n";
  for (const auto& e : curve) {
    for (const auto& [split, s] : {std::pair{"train", &e.train}, std::pair{"val", &e.val}}) {
      out << e.epoch << ',' << split << ',' << s->iw_loss << ',' << s->plain_loss << ','
          << s->accuracy.accuracy() << ',' << s->accuracy.inflection_recall() << '\n';
    }
  }
  return out.str();
}

}  // namespace eqa::imitation
