#include "eqa/dataset.hpp"
#include "eqa/error.hpp"
#include "eqa/imitation.hpp"
#include "eqa/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace eqa;
using namespace eqa::imitation;

namespace {

// Features identify the step index, so a policy can memorize the actions.
Sequence indexed_sequence(const std::string& actions, int dim) {
  Sequence s;
  s.actions = actions_from_string(actions);
  const int T = static_cast<int>(s.actions.size());
  s.features = Eigen::MatrixXd::Zero(dim, T);
  for (int t = 0; t < T; ++t) s.features(t % dim, t) = 1.0;
  return s;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam(3, 0.1, 0.9, 0.999, 1e-12);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 2.0, -0.5, 0.0;
  adam.step(p, g);
  EXPECT_NEAR(p[0], -0.1, 1e-9);
  EXPECT_NEAR(p[1], 0.1, 1e-9);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Train, MemorizesOneEpisode) {
  for (auto kind : {PolicyKind::Memory, PolicyKind::Reactive}) {
    const auto seq = indexed_sequence("FFFFLLLFFFRRFFFFFFFS", 22);
    PolicyConfig pc;
    pc.kind = kind;
    pc.hidden = 32;
    TrainConfig tc;
    tc.epochs = 500;
    tc.batch_size = 1;
    tc.learning_rate = 1e-2;
    const auto res = train({seq}, {seq}, pc, tc);
    const auto& last = res.curve.back().train.accuracy;
    EXPECT_GE(last.accuracy(), 0.99) << name(kind);
    EXPECT_EQ(last.inflection_recall(), 1.0) << name(kind);
    EXPECT_EQ(res.curve.size(), 500u);
  }
}

TEST(Train, MeasuredRatioComesFromTrainingSet) {
  const auto seq = indexed_sequence("FFFFLLLL", 8);
  PolicyConfig pc;
  pc.kind = PolicyKind::Reactive;
  pc.feature_dim = 8;
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_DOUBLE_EQ(train({seq}, {}, pc, tc).inflection_ratio, 4.0);
  tc.inflection_ratio = 3.0;
  EXPECT_DOUBLE_EQ(train({seq}, {}, pc, tc).inflection_ratio, 3.0);
}

TEST(Train, UnweightedLossIgnoresRareInflections) {
  // Uninformative features: the best constant prediction under the plain loss
  // is the majority action, which never hits an inflection.
  std::vector<Sequence> set;
  for (int i = 0; i < 6; ++i) {
    Sequence s;
    s.actions = actions_from_string("FFFFFFFFFL");
    s.features = Eigen::MatrixXd::Ones(4, 10);
    set.push_back(s);
  }
  PolicyConfig pc;
  pc.kind = PolicyKind::Reactive;
  pc.feature_dim = 4;
  TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 1e-2;
  tc.inflection_weighting = false;
  const auto res = train(set, set, pc, tc);
  const auto& acc = res.curve.back().val.accuracy;
  EXPECT_NEAR(acc.accuracy(), 0.9, 1e-12);
  EXPECT_LT(acc.inflection_recall(), 0.5 * acc.accuracy());
}

TEST(Train, SeededRunsAreIdentical) {
  const auto a = indexed_sequence("FFLLFRRS", 22);
  const auto b = indexed_sequence("LFFFFFRS", 22);
  PolicyConfig pc;
  pc.hidden = 8;
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 1;
  const auto r1 = train({a, b}, {a}, pc, tc);
  const auto r2 = train({a, b}, {a}, pc, tc);
  EXPECT_EQ(r1.policy.params(), r2.policy.params());
  tc.seed = 8;
  EXPECT_NE(train({a, b}, {a}, pc, tc).policy.params(), r1.policy.params());
}

TEST(Train, NonFiniteLossRaisesInvariantError) {
  auto seq = indexed_sequence("FFLLFRRS", 22);
  seq.features(0, 3) = std::numeric_limits<double>::quiet_NaN();
  PolicyConfig pc;
  pc.hidden = 8;
  TrainConfig tc;
  tc.epochs = 2;
  EXPECT_THROW(train({seq}, {}, pc, tc), InvariantError);
}

TEST(Train, ConfigValidation) {
  TrainConfig tc;
  EXPECT_NO_THROW(tc.validate());
  EXPECT_DOUBLE_EQ(tc.effective_learning_rate(PolicyKind::Memory), 2e-4);
  EXPECT_DOUBLE_EQ(tc.effective_learning_rate(PolicyKind::Reactive), 1e-3);
  tc.inflection_ratio = 0.5;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.epochs = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.beta2 = 1.0;
  EXPECT_THROW(tc.validate(), ConfigError);
}

TEST(Train, CurveCsvHasTwoRowsPerEpoch) {
  const auto seq = indexed_sequence("FFLS", 22);
  PolicyConfig pc;
  pc.hidden = 4;
  TrainConfig tc;
  tc.epochs = 3;
  const auto csv = curve_to_csv(train({seq}, {seq}, pc, tc).curve);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,split,iw_loss,plain_loss,accuracy,inflection_recall");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
}

TEST(Features, EpisodeFeaturesShapeAndPreviousAction) {
  episodes::DatasetConfig cfg;
  cfg.num_envs = 3;
  cfg.seed = 21;
  cfg.entropy_threshold = 0.0;
  cfg.questions_per_env = 1;
  cfg.episodes_per_question = 1;
  const auto ds = episodes::build_dataset(cfg, 1);
  FeaturePipeline pipe;
  pipe.view = cfg.episode.view;
  pipe.render = cfg.episode.render;
  std::vector<const episodes::Episode*> eps;
  for (const auto& [split, list] : ds.episodes) {
    for (const auto& e : list) eps.push_back(&e);
  }
  ASSERT_FALSE(eps.empty());
  const auto cache = compute_features(ds, eps, pipe, 2);
  ASSERT_EQ(cache.size(), eps.size());
  const int dim = pipe.features.dim();
  const int prev0 = dim - kNumActions;
  for (const auto* e : eps) {
    const auto& f = cache.at(e->episode_id);
    ASSERT_EQ(f.rows(), dim);
    ASSERT_EQ(f.cols(), static_cast<Eigen::Index>(e->length()));
    EXPECT_EQ(f.block(prev0, 0, kNumActions, 1).sum(), 0.0);
    for (std::size_t t = 1; t < e->length(); ++t) {
      const int a = static_cast<int>(e->expert_actions[t - 1]);
      EXPECT_EQ(f(prev0 + a, static_cast<Eigen::Index>(t)), 1.0);
    }
    EXPECT_EQ(f, episode_features(ds.scene(e->env_id), *e, pipe));
  }
  const auto seqs = make_sequences(eps, cache);
  ASSERT_EQ(seqs.size(), eps.size());
  EXPECT_EQ(seqs[0].actions, eps[0]->expert_actions);
}
