#include "eqa/error.hpp"
#include "eqa/imitation.hpp"
#include "eqa/policy.hpp"
#include "eqa/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace eqa;
using namespace eqa::imitation;

namespace {

std::vector<Action> acts(const std::string& s) { return actions_from_string(s); }

Sequence random_sequence(Rng& rng, int d, int T, double ratio) {
  Sequence s;
  s.features = Eigen::MatrixXd(d, T);
  for (Eigen::Index i = 0; i < s.features.size(); ++i) s.features.data()[i] = rng.normal();
  for (int t = 0; t < T; ++t) s.actions.push_back(static_cast<Action>(rng.uniform_int(kNumActions)));
  s.weights = inflection_weights(s.actions, ratio);
  return s;
}

}  // namespace

TEST(Inflection, WeightsFollowTheRule) {
  EXPECT_EQ(inflection_weights(acts("FFLF"), 3.0), (std::vector<double>{3, 1, 3, 3}));
  EXPECT_EQ(inflection_weights(acts("FFFFF"), 2.0), (std::vector<double>{2, 1, 1, 1, 1}));
  EXPECT_THROW(inflection_weights(acts("FF"), 0.5), ConfigError);
  EXPECT_THROW(inflection_weights(std::vector<Action>{}, 2.0), ConfigError);
}

TEST(Inflection, RatioExamples) {
  const auto a = inflection_ratio({acts("FFFF")});
  EXPECT_EQ(a.total_steps, 4u);
  EXPECT_EQ(a.inflection_count, 1u);
  EXPECT_DOUBLE_EQ(a.ratio, 4.0);
  EXPECT_DOUBLE_EQ(inflection_ratio({acts("FLFL")}).ratio, 1.0);
  EXPECT_THROW(inflection_ratio({}), ConfigError);
}

TEST(Inflection, RatioMatchesNaiveRecountOnRandomTrajectories) {
  Rng rng(1);
  std::vector<std::vector<Action>> trajs;
  uint64_t n = 0, ni = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<Action> a;
    const int T = 1 + static_cast<int>(rng.uniform_int(60));
    for (int t = 0; t < T; ++t) {
      a.push_back(rng.bernoulli(0.8) && t > 0 ? a.back() : static_cast<Action>(rng.uniform_int(4)));
    }
    for (int t = 0; t < T; ++t) {
      ++n;
      if (t == 0 || a[t] != a[t - 1]) ++ni;
    }
    trajs.push_back(std::move(a));
  }
  const auto s = inflection_ratio(trajs);
  EXPECT_EQ(s.total_steps, n);
  EXPECT_EQ(s.inflection_count, ni);
}

TEST(Loss, FixedLogitsMatchIndependentEvaluator) {
  // Values frozen from a separate evaluator (log-sum-exp in plain floats).
  Eigen::MatrixXd L(4, 5);
  L << 0.3, -1.2, 0.5, 2.0, 0.1,
       1.1, 0.4, -0.7, 0.0, 0.9,
      -0.5, 0.8, 0.2, -1.5, 0.3,
       0.0, 0.0, 1.0, 0.5, -2.0;
  const auto a = acts("FFLFS");
  const auto w = inflection_weights(a, 2.5);
  EXPECT_EQ(w, (std::vector<double>{2.5, 1.0, 2.5, 2.5, 2.5}));
  EXPECT_NEAR(iw_loss(L, a, std::vector<double>(5, 1.0)).loss, 2.1503710361906814, 1e-13);
  EXPECT_NEAR(iw_loss(L, a, w).loss, 2.0599930400767423, 1e-13);
}

TEST(Loss, UniformLogitsGiveLnFour) {
  const Eigen::MatrixXd L = Eigen::MatrixXd::Zero(4, 6);
  const auto a = acts("FLRSFF");
  EXPECT_NEAR(iw_loss(L, a, inflection_weights(a, 7.0)).loss, std::log(4.0), 1e-15);
}

TEST(Loss, UnitWeightsEqualMeanCrossEntropy) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform_int(30));
    Eigen::MatrixXd L(4, T);
    for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = 3 * rng.normal();
    std::vector<Action> a;
    for (int t = 0; t < T; ++t) a.push_back(static_cast<Action>(rng.uniform_int(4)));
    double ce = 0;
    for (int t = 0; t < T; ++t) ce += cross_entropy(L.col(t), a[t]);
    EXPECT_NEAR(iw_loss(L, a, std::vector<double>(T, 1.0)).loss, ce / T, 1e-12);
  }
}

TEST(Loss, GradientScaleInvariantAndMatchesFiniteDifference) {
  Rng rng(3);
  Eigen::MatrixXd L(4, 8);
  for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = rng.normal();
  const auto a = acts("FFLLFRFS");
  const auto w = inflection_weights(a, 3.0);
  std::vector<double> w2(w);
  for (auto& x : w2) x *= 2.0;
  const auto g = iw_loss_gradient(L, a, w);
  EXPECT_EQ(g, iw_loss_gradient(L, a, w2));
  EXPECT_EQ(iw_loss(L, a, w).loss, iw_loss(L, a, w2).loss);
  for (Eigen::Index i = 0; i < L.size(); ++i) {
    Eigen::MatrixXd up = L, dn = L;
    up.data()[i] += 1e-6;
    dn.data()[i] -= 1e-6;
    const double fd = (iw_loss(up, a, w).loss - iw_loss(dn, a, w).loss) / 2e-6;
    EXPECT_NEAR(fd, g.data()[i], 1e-8);
  }
}

TEST(Accuracy, RepeatPreviousOracleCounts) {
  const auto acc = repeat_previous_oracle({acts("FFFLLF"), acts("FFS")});
  // Truth FFFLLF predicted FFFFLL: 4 correct; FFS predicted FFF: 2 correct.
  EXPECT_EQ(acc.steps, 9u);
  EXPECT_EQ(acc.correct, 6u);
  EXPECT_EQ(acc.inflections, 3u);
  EXPECT_EQ(acc.inflections_correct, 0u);
  EXPECT_EQ(acc.inflection_recall(), 0.0);
}

TEST(Policy, ZeroParametersGiveUniformLogits) {
  for (auto kind : {PolicyKind::Reactive, PolicyKind::Memory}) {
    PolicyConfig pc;
    pc.kind = kind;
    const Policy p(pc);
    const auto logits = p.forward(Eigen::MatrixXd::Random(pc.feature_dim, 6));
    EXPECT_EQ(logits, Eigen::MatrixXd::Zero(4, 6));
  }
}

TEST(Policy, StepMatchesForwardAndIsDeterministic) {
  Rng rng(4);
  for (auto kind : {PolicyKind::Reactive, PolicyKind::Memory}) {
    PolicyConfig pc;
    pc.kind = kind;
    pc.hidden = 12;
    pc.layers = 2;
    const auto p = Policy::random(pc, 9);
    const auto seq = random_sequence(rng, pc.feature_dim, 9, 2.0);
    const auto full = p.forward(seq.features);
    EXPECT_EQ(full, p.forward(seq.features));
    auto st = p.initial_state();
    for (int t = 0; t < 9; ++t) {
      EXPECT_TRUE(p.step(st, seq.features.col(t)).isApprox(full.col(t), 1e-12));
    }
  }
}

TEST(Policy, ReactiveEarlyStepsUseZeroPaddedWindow) {
  PolicyConfig pc;
  pc.kind = PolicyKind::Reactive;
  pc.feature_dim = 3;
  pc.window = 5;
  const auto p = Policy::random(pc, 2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 3);
  const auto logits = p.forward(x);
  // Explicit padding: the window at t = 2 is [x2, x1, x0, 0, 0].
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(3, 5);
  padded.rightCols(3) = x;
  const auto lp = p.forward(padded);
  EXPECT_TRUE(logits.col(2).isApprox(lp.col(4), 1e-12));
}

TEST(Policy, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  for (auto kind : {PolicyKind::Reactive, PolicyKind::Memory}) {
    PolicyConfig pc;
    pc.kind = kind;
    pc.feature_dim = 6;
    pc.hidden = 5;
    pc.layers = 2;
    pc.window = 3;
    auto p = Policy::random(pc, 13);
    const auto seq = random_sequence(rng, pc.feature_dim, 10, 4.0);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.params().size());
    p.loss_and_gradient(seq, &g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double keep = p.params()[i];
      p.params()[i] = keep + 1e-4;
      const double up = p.loss_and_gradient(seq, nullptr);
      p.params()[i] = keep - 1e-4;
      const double dn = p.loss_and_gradient(seq, nullptr);
      p.params()[i] = keep;
      const double fd = (up - dn) / 2e-4;
      const double rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6});
      ASSERT_LE(rel, 1e-4) << name(kind) << " parameter " << i;
    }
  }
}

TEST(Policy, DoubledWeightsSameGradient) {
  Rng rng(6);
  PolicyConfig pc;
  pc.hidden = 8;
  const auto p = Policy::random(pc, 1);
  auto seq = random_sequence(rng, pc.feature_dim, 7, 3.0);
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(p.params().size()), g2 = g1;
  const double l1 = p.loss_and_gradient(seq, &g1);
  for (auto& w : seq.weights) w *= 2.0;
  const double l2 = p.loss_and_gradient(seq, &g2);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(g1, g2);
}

TEST(Policy, TensorRoundTripKeepsLayout) {
  PolicyConfig pc;
  pc.kind = PolicyKind::Memory;
  pc.hidden = 10;
  pc.layers = 2;
  const auto p = Policy::random(pc, 3);
  const auto back = Policy::from_tensors(decode_tensors(encode_tensors(p.to_tensors())));
  EXPECT_EQ(back.config().hidden, 10);
  EXPECT_EQ(back.config().layers, 2);
  ASSERT_EQ(back.params().size(), p.params().size());
  EXPECT_TRUE(back.params().isApprox(p.params().cast<float>().cast<double>(), 0.0));
}

TEST(Policy, ConfigValidation) {
  PolicyConfig pc;
  pc.hidden = 0;
  EXPECT_THROW(pc.validate(), ConfigError);
  EXPECT_EQ(parse_policy_kind(name(PolicyKind::Reactive)), PolicyKind::Reactive);
  EXPECT_THROW(parse_policy_kind("lstm"), ConfigError);
}

TEST(Policy, BatchLossIsMeanOfSequenceLosses) {
  Rng rng(7);
  PolicyConfig pc;
  pc.hidden = 6;
  const auto p = Policy::random(pc, 4);
  const auto a = random_sequence(rng, pc.feature_dim, 5, 2.0);
  const auto b = random_sequence(rng, pc.feature_dim, 11, 2.0);
  const std::vector<const Sequence*> batch{&a, &b};
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p.params().size());
  const double l = batch_loss_and_gradient(p, batch, &g);
  Eigen::VectorXd ga = Eigen::VectorXd::Zero(p.params().size()), gb = ga;
  const double la = p.loss_and_gradient(a, &ga), lb = p.loss_and_gradient(b, &gb);
  EXPECT_NEAR(l, 0.5 * (la + lb), 1e-12);
  EXPECT_TRUE(g.isApprox(0.5 * (ga + gb), 1e-12));
}
