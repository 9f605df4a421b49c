#include "selftest.hpp"

#include "eqa/dataset.hpp"
#include "eqa/env_model.hpp"
#include "eqa/eval.hpp"
#include "eqa/imitation.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/pointnet_ops.hpp"
#include "eqa/policy.hpp"
#include "eqa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

namespace eqa::tools {
namespace {

struct Suite {
  const char* name;
  std::function<std::string()> run;  // empty string on success
};

std::string occlusion_suite() {
  const auto env = env::generate_environment(env::EnvGenSpec{}, 11);
  const render::Renderer renderer(env);
  const auto grid = env::occupancy_grid(env, 0.05, 0.1);
  Rng rng(5);
  render::RenderConfig cfg;
  cfg.raster_width = 512;
  cfg.raster_height = 512;
  std::size_t agree = 0, total = 0;
  for (int i = 0; i < 6; ++i) {
    AgentState s;
    do {
      s.position = Vec2(rng.uniform(env.bounds.lo.x(), env.bounds.hi.x()),
                        rng.uniform(env.bounds.lo.y(), env.bounds.hi.y()));
    } while (!grid.is_free(s.position));
    s.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto cam = render::make_camera(s, cfg);
    if (renderer.visible_two_pass(cam, cfg) != renderer.visible_bruteforce(cam, cfg)) {
      return "two-pass visibility differs from the dense pass at pose " + std::to_string(i);
    }
    const auto culled = render::frustum_cull(env.global_cloud, cam);
    const auto depth = render::raster_depth_buffer(env.surfaces, cam, cfg.raster_width,
                                                   cfg.raster_height);
    const auto raster = render::raster_occlusion_filter(env.global_cloud, culled, depth, cam,
                                                        cfg.epsilon);
    const auto ray = render::ray_occlusion_filter(env.global_cloud, culled, env.surfaces, cam,
                                                  cfg.epsilon);
    const std::set<uint32_t> a(raster.begin(), raster.end()), b(ray.begin(), ray.end());
    for (uint32_t p : culled) agree += (a.contains(p) == b.contains(p)) ? 1 : 0;
    total += culled.size();
  }
  const double rate = total ? static_cast<double>(agree) / total : 1.0;
  if (rate < 0.99) return "raster/ray agreement " + std::to_string(rate) + " < 0.99";
  return {};
}

std::vector<uint32_t> fps_reference(const std::vector<Vec3f>& p, std::size_t k, std::size_t start) {
  std::vector<uint32_t> sel{static_cast<uint32_t>(start)};
  while (sel.size() < k) {
    double best = -1.0;
    uint32_t arg = 0;
    for (uint32_t i = 0; i < p.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double m = std::numeric_limits<double>::infinity();
      for (uint32_t j : sel) m = std::min(m, static_cast<double>((p[i].cast<double>() - p[j].cast<double>()).squaredNorm()));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    sel.push_back(arg);
  }
  return sel;
}

std::string sampling_suite() {
  Rng rng(9);
  for (int inst = 0; inst < 40; ++inst) {
    const std::size_t n = 5 + rng.uniform_int(120);
    std::vector<Vec3f> p(n);
    for (auto& v : p) {
      v = Vec3f(static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                static_cast<float>(rng.uniform()));
    }
    const std::size_t k = 1 + rng.uniform_int(n);
    const std::size_t start = pointnet::lexicographic_min_index(p);
    if (pointnet::farthest_point_sample(p, k, start) != fps_reference(p, k, start)) {
      return "farthest point sampling differs from the reference on instance " + std::to_string(inst);
    }
    const Vec3f c = p[rng.uniform_int(n)];
    const double r = rng.uniform(0.05, 0.5);
    const std::size_t kk = 1 + rng.uniform_int(16);
    std::vector<std::pair<double, uint32_t>> all;
    for (uint32_t i = 0; i < n; ++i) {
      all.emplace_back((p[i].cast<double>() - c.cast<double>()).squaredNorm(), i);
    }
    std::sort(all.begin(), all.end());
    std::vector<uint32_t> ref;
    for (const auto& [d, i] : all) {
      if (d <= r * r && ref.size() < kk) ref.push_back(i);
    }
    if (ref.empty()) ref.push_back(all.front().second);
    if (pointnet::ball_query(p, c, r, kk) != ref) {
      return "ball query differs from the reference on instance " + std::to_string(inst);
    }
  }
  return {};
}

std::string gradient_suite() {
  Rng rng(3);
  for (const auto kind : {imitation::PolicyKind::Reactive, imitation::PolicyKind::Memory}) {
    imitation::PolicyConfig pc;
    pc.kind = kind;
    pc.feature_dim = 5;
    pc.hidden = 4;
    pc.layers = 2;
    pc.window = 3;
    auto policy = imitation::Policy::random(pc, 17);
    policy.params() *= 2.0;
    imitation::Sequence seq;
    const int T = 7;
    seq.features = Eigen::MatrixXd::Random(pc.feature_dim, T);
    for (int t = 0; t < T; ++t) seq.actions.push_back(static_cast<Action>(rng.uniform_int(kNumActions)));
    seq.weights = imitation::inflection_weights(seq.actions, 3.0);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.params().size());
    policy.loss_and_gradient(seq, &grad);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      const double keep = policy.params()[i];
      policy.params()[i] = keep + h;
      const double up = policy.loss_and_gradient(seq, nullptr);
      policy.params()[i] = keep - h;
      const double dn = policy.loss_and_gradient(seq, nullptr);
      policy.params()[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      if (rel > 1e-4) {
        return std::string(imitation::name(kind)) + " gradient mismatch at parameter " +
               std::to_string(i) + ": relative error " + std::to_string(rel);
      }
    }
  }
  return {};
}

std::string loss_suite() {
  Rng rng(4);
  const int T = 9;
  Eigen::MatrixXd logits = Eigen::MatrixXd::Random(kNumActions, T) * 3.0;
  std::vector<Action> actions;
  for (int t = 0; t < T; ++t) actions.push_back(static_cast<Action>(rng.uniform_int(kNumActions)));
  const std::vector<double> ones(T, 1.0);
  double mean_ce = 0.0;
  for (int t = 0; t < T; ++t) mean_ce += imitation::cross_entropy(logits.col(t), actions[t]);
  mean_ce /= T;
  if (std::abs(imitation::iw_loss(logits, actions, ones).loss - mean_ce) > 1e-12) {
    return "unit-weight loss differs from mean cross-entropy";
  }
  const auto w = imitation::inflection_weights(actions, 4.0);
  std::vector<double> w3(w);
  for (auto& x : w3) x *= 3.0;
  const auto g1 = imitation::iw_loss_gradient(logits, actions, w);
  const auto g3 = imitation::iw_loss_gradient(logits, actions, w3);
  if (std::abs(imitation::iw_loss(logits, actions, w).loss -
               imitation::iw_loss(logits, actions, w3).loss) > 1e-12 ||
      (g1 - g3).cwiseAbs().maxCoeff() > 1e-12) {
    return "scaling the weights changed the loss or its gradient";
  }
  return {};
}

std::string metrics_suite() {
  episodes::DatasetConfig cfg;
  cfg.num_envs = 3;
  cfg.seed = 21;
  cfg.questions_per_env = 1;
  cfg.entropy_threshold = 0.0;
  cfg.episodes_per_question = 2;
  const auto ds = episodes::build_dataset(cfg, 1);
  std::vector<const episodes::Episode*> eps;
  for (const auto& [split, list] : ds.episodes) {
    for (const auto& e : list) eps.push_back(&e);
  }
  if (eps.empty()) return "no episodes generated";
  eval::EvalConfig ec;
  ec.motion = cfg.episode.motion;
  ec.view = cfg.episode.view;
  ec.render = cfg.episode.render;
  const eval::AnswerPrior prior(ds.questions);
  std::vector<eval::EvalJob> jobs{
      {"expert", [] { return std::make_unique<eval::ExpertNavigator>(); }},
      {"forward-only", [] { return std::make_unique<eval::ForwardOnlyNavigator>(); }}};
  const auto records = eval::evaluate(ds, eps, jobs, {10}, ec, prior, nullptr, 1);
  for (const auto& r : records) {
    if (r.failed) return "record failed: " + r.error;
    if (r.dDelta != r.d0 - r.dT) return "dDelta identity broken for " + r.episode_id;
    if (r.dmin > r.dT) return "dmin > dT for " + r.episode_id;
    if (r.navigator == "expert") {
      if (std::abs(r.iou_T - 1.0) > 1e-6) return "expert iou_T != 1 for " + r.episode_id;
      if (r.dT > ec.motion.forward_step + 1e-9) return "expert dT > forward_step for " + r.episode_id;
    }
  }
  const std::vector<double> constant(10, 0.3);
  const auto [lo, hi] = eval::bootstrap_ci(constant, 0.9, 500, 1);
  if (lo != 0.3 || hi != 0.3) return "constant samples gave a non-zero-width interval";
  return {};
}

}  // namespace

int run_selftest(std::ostream& out) {
  const std::vector<Suite> suites{{"occlusion", occlusion_suite},
                                  {"sampling", sampling_suite},
                                  {"gradients", gradient_suite},
                                  {"loss-identities", loss_suite},
                                  {"metric-identities", metrics_suite}};
  int failed = 0;
  for (const auto& s : suites) {
    std::string msg;
    try {
      msg = s.run();
    } catch (const std::exception& e) {
      msg = std::string("exception: ") + e.what();
    }
    out << (msg.empty() ? "PASS " : "FAIL ") << s.name;
    if (!msg.empty()) out << ": " << msg;
    out << "\n";
    failed += msg.empty() ? 0 : 1;
  }
  return failed;
}

}  // namespace eqa::tools
