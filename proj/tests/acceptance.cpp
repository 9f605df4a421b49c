// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 only when
// every criterion passes.
#include "eqa/dataset.hpp"
#include "eqa/env_model.hpp"
#include "eqa/error.hpp"
#include "eqa/eval.hpp"
#include "eqa/imitation.hpp"
#include "eqa/pathfind.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/pointnet_ops.hpp"
#include "eqa/policy.hpp"
#include "eqa/rng.hpp"
#include "eqa/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <string_view>
#include <vector>

using namespace eqa;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Outcome& o) {
  std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1: raster vs ray occlusion ----------------------------------------------

Outcome occlusion_equivalence() {
  const auto t0 = Clock::now();
  render::RenderConfig cfg;
  cfg.raster_width = 512;
  cfg.raster_height = 512;
  cfg.epsilon = 0.25;
  std::vector<env::Environment> envs;
  for (uint64_t s = 0; s < 5; ++s) envs.push_back(env::generate_environment({}, mix_seed(901, s)));
  Rng rng(77);
  std::size_t agree = 0, total = 0;
  double worst = 1.0;
  for (int pair = 0; pair < 100; ++pair) {
    const auto& env = envs[rng.uniform_int(envs.size())];
    const auto grid = env::occupancy_grid(env, 0.05, 0.1);
    AgentState s;
    do {
      s.position = Vec2(rng.uniform(env.bounds.lo.x(), env.bounds.hi.x()),
                        rng.uniform(env.bounds.lo.y(), env.bounds.hi.y()));
    } while (!grid.is_free(s.position));
    s.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto cam = render::make_camera(s, cfg);
    const auto culled = render::frustum_cull(env.global_cloud, cam);
    const auto depth = render::raster_depth_buffer(env.surfaces, cam, 512, 512);
    const auto raster = render::raster_occlusion_filter(env.global_cloud, culled, depth, cam, cfg.epsilon);
    const auto ray = render::ray_occlusion_filter(env.global_cloud, culled, env.surfaces, cam, cfg.epsilon);
    const std::set<uint32_t> a(raster.begin(), raster.end()), b(ray.begin(), ray.end());
    std::size_t local = 0;
    for (uint32_t p : culled) local += (a.contains(p) == b.contains(p)) ? 1 : 0;
    agree += local;
    total += culled.size();
    if (!culled.empty()) worst = std::min(worst, static_cast<double>(local) / culled.size());
  }
  const double rate = static_cast<double>(agree) / static_cast<double>(total);
  const double secs = seconds_since(t0);
  return {rate >= 0.99 && secs < 60.0,
          fmt("agreement %.5f over %zu culled points (worst pose %.4f), %.1f s", rate, total, worst, secs)};
}

// --- 2: FPS and ball query ---------------------------------------------------

std::vector<uint32_t> naive_fps(const std::vector<Vec3f>& p, std::size_t k, std::size_t start) {
  std::vector<uint32_t> sel{static_cast<uint32_t>(start)};
  while (sel.size() < k) {
    double best = -1.0;
    uint32_t arg = 0;
    for (uint32_t i = 0; i < p.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double m = std::numeric_limits<double>::infinity();
      for (uint32_t j : sel) {
        m = std::min(m, static_cast<double>((p[i].cast<double>() - p[j].cast<double>()).squaredNorm()));
      }
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    sel.push_back(arg);
  }
  return sel;
}

std::vector<uint32_t> naive_ball(const std::vector<Vec3f>& p, const Vec3f& c, double r, std::size_t k) {
  std::vector<std::pair<double, uint32_t>> all;
  for (uint32_t i = 0; i < p.size(); ++i) {
    all.emplace_back((p[i].cast<double>() - c.cast<double>()).squaredNorm(), i);
  }
  std::sort(all.begin(), all.end());
  std::vector<uint32_t> out;
  for (const auto& [d, i] : all) {
    if (d <= r * r && out.size() < k) out.push_back(i);
  }
  if (out.empty()) out.push_back(all.front().second);
  return out;
}

Outcome sampling_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  int fps_bad = 0, ball_bad = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 2 + rng.uniform_int(199);
    std::vector<Vec3f> p(n);
    for (auto& v : p) {
      v = Vec3f(static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1)),
                static_cast<float>(rng.uniform(-1, 1)));
    }
    const std::size_t k = 1 + rng.uniform_int(n);
    const std::size_t start = rng.uniform_int(n);
    if (pointnet::farthest_point_sample(p, k, start) != naive_fps(p, k, start)) ++fps_bad;
    const Vec3f c(static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1)),
                  static_cast<float>(rng.uniform(-1, 1)));
    const double r = rng.uniform(0.05, 0.8);
    const std::size_t kk = 1 + rng.uniform_int(32);
    if (pointnet::ball_query(p, c, r, kk) != naive_ball(p, c, r, kk)) ++ball_bad;
  }
  const double secs = seconds_since(t0);
  return {fps_bad == 0 && ball_bad == 0 && secs < 10.0,
          fmt("200 instances: %d FPS and %d ball-query mismatches, %.2f s", fps_bad, ball_bad, secs)};
}

// --- 3: gradients ------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(31);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto kind : {imitation::PolicyKind::Reactive, imitation::PolicyKind::Memory}) {
    imitation::PolicyConfig pc;
    pc.kind = kind;
    auto policy = imitation::Policy::random(pc, 5);
    imitation::Sequence seq;
    const int T = 12;
    seq.features = Eigen::MatrixXd::Random(pc.feature_dim, T);
    for (int t = 0; t < T; ++t) seq.actions.push_back(static_cast<Action>(rng.uniform_int(kNumActions)));
    seq.weights = imitation::inflection_weights(seq.actions, 5.0);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.params().size());
    policy.loss_and_gradient(seq, &grad);
    const double h = 1e-4;
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      const double keep = policy.params()[i];
      policy.params()[i] = keep + h;
      const double up = policy.loss_and_gradient(seq, nullptr);
      policy.params()[i] = keep - h;
      const double dn = policy.loss_and_gradient(seq, nullptr);
      policy.params()[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 120.0,
          fmt("%zu parameters, worst relative error %.3g, %.1f s", checked, worst, secs)};
}

// --- 4: loss identities ------------------------------------------------------

Outcome loss_identities() {
  Rng rng(8);
  double unit_gap = 0.0;
  bool exact = true;
  double policy_gap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform_int(40));
    Eigen::MatrixXd logits(kNumActions, T);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 4.0 * rng.normal();
    std::vector<Action> actions;
    for (int t = 0; t < T; ++t) actions.push_back(static_cast<Action>(rng.uniform_int(kNumActions)));
    double ce = 0.0;
    for (int t = 0; t < T; ++t) ce += imitation::cross_entropy(logits.col(t), actions[t]);
    ce /= T;
    unit_gap = std::max(unit_gap, std::abs(imitation::iw_loss(logits, actions, std::vector<double>(T, 1.0)).loss - ce));
    const auto w = imitation::inflection_weights(actions, rng.uniform(1.0, 8.0));
    const double l = imitation::iw_loss(logits, actions, w).loss;
    const auto g = imitation::iw_loss_gradient(logits, actions, w);
    for (double scale : {2.0, 0.25, 8.0}) {
      std::vector<double> ws(w);
      for (auto& x : ws) x *= scale;
      exact = exact && imitation::iw_loss(logits, actions, ws).loss == l &&
              imitation::iw_loss_gradient(logits, actions, ws) == g;
    }
  }
  // Same identity through the policy's parameter gradient.
  imitation::PolicyConfig pc;
  pc.hidden = 8;
  const auto policy = imitation::Policy::random(pc, 3);
  imitation::Sequence seq;
  seq.features = Eigen::MatrixXd::Random(pc.feature_dim, 15);
  for (int t = 0; t < 15; ++t) seq.actions.push_back(static_cast<Action>(rng.uniform_int(kNumActions)));
  seq.weights = imitation::inflection_weights(seq.actions, 3.0);
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(policy.params().size()), g2 = g1;
  const double l1 = policy.loss_and_gradient(seq, &g1);
  for (auto& x : seq.weights) x *= 4.0;
  const double l2 = policy.loss_and_gradient(seq, &g2);
  exact = exact && l1 == l2 && g1 == g2;
  policy_gap = std::abs(l1 - l2);
  return {unit_gap <= 1e-12 && exact,
          fmt("unit-weight gap %.2g (tol 1e-12); weight scaling %s (policy gap %.2g)", unit_gap,
              exact ? "bit-identical" : "changed the loss or gradient", policy_gap)};
}

// --- 8: pathfinding sandwich -------------------------------------------------

Outcome pathfinding_sandwich() {
  const auto t0 = Clock::now();
  Rng rng(55);
  MotionConfig motion;
  int grids = 0, order_bad = 0, collisions = 0, replay_bad = 0;
  double worst_excess = 0.0;
  std::string first_miss;
  while (grids < 500) {
    const double res = 0.1;
    const Box2 area{Vec2(0, 0), Vec2(rng.uniform(2.0, 5.0), rng.uniform(2.0, 5.0))};
    std::vector<Box2> obstacles;
    const int n = static_cast<int>(rng.uniform_int(7));
    for (int i = 0; i < n; ++i) {
      const Vec2 c(rng.uniform(area.lo.x(), area.hi.x()), rng.uniform(area.lo.y(), area.hi.y()));
      const Vec2 half(rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6));
      obstacles.push_back(Box2{c - half, c + half});
    }
    const auto grid = env::occupancy_grid(area, obstacles, res, 0.1);
    std::vector<std::array<int, 2>> free_cells;
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        if (grid.free(x, y)) free_cells.push_back({x, y});
      }
    }
    if (free_cells.size() < 2) continue;
    const auto a = free_cells[rng.uniform_int(free_cells.size())];
    const auto b = free_cells[rng.uniform_int(free_cells.size())];
    const Vec2 s = grid.cell_center(a[0], a[1]);
    const Vec2 g = grid.cell_center(b[0], b[1]);
    path::WaypointPath lt, as;
    try {
      lt = path::lazy_theta_star(grid, s, g);
      as = path::astar8(grid, s, g);
    } catch (const NoPathError&) {
      continue;
    }
    ++grids;
    const double eu = (g - s).norm();
    if (!(eu <= lt.length + 1e-9 && lt.length <= as.length + 1e-9)) ++order_bad;
    worst_excess = std::max(worst_excess, lt.length - as.length);
    AgentState start;
    start.position = s;
    start.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    try {
      const auto fr = path::follow_path(lt, start, motion, grid);
      AgentState cur = start;
      for (Action act : fr.actions) {
        bool hit = false;
        cur = path::step_agent(grid, cur, act, motion, &hit);
        collisions += hit ? 1 : 0;
      }
      if ((cur.position - g).norm() > motion.forward_step + 1e-9) {
        if (replay_bad++ == 0) first_miss = fmt("grid %d ends %.3f m from the goal", grids, (cur.position - g).norm());
      }
    } catch (const GenerationError& e) {
      if (replay_bad++ == 0) first_miss = fmt("grid %d: %s", grids, e.what());
    }
  }
  const double secs = seconds_since(t0);
  return {order_bad == 0 && collisions == 0 && replay_bad == 0 && secs < 60.0,
          fmt("500 grids: %d ordering violations (max LazyTheta*-A* excess %.3g m), %d replay "
              "collisions, %d endpoint misses%s%s, %.1f s",
              order_bad, worst_excess, collisions, replay_bad, first_miss.empty() ? "" : "; first: ",
              first_miss.c_str(), secs)};
}

// --- 10 (synthetic part): bootstrap ------------------------------------------

double mean_ci_width(std::size_t n, int reps, uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = 3.0 + 2.0 * rng.normal();
    const auto [lo, hi] = eval::bootstrap_ci(xs, 0.90, 2000, mix_seed(seed, r));
    sum += hi - lo;
  }
  return sum / reps;
}

// --- dataset-scale criteria (5, 6, 7, 9, 10) ---------------------------------

struct PolicyRun {
  uint64_t seed = 0;
  bool iw = false;
  std::string id;
  imitation::Policy policy;
  double recall = 0.0;
  double accuracy = 0.0;
};

}  // namespace

// --quick runs only the standalone criteria (1-4, 8).
int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string_view(argv[1]) == "--quick";
  std::printf("acceptance: %s\n", quick ? "standalone criteria only" : "10 criteria");
  std::fflush(stdout);
  report(1, "raster vs ray occlusion", occlusion_equivalence());
  report(2, "FPS and ball query", sampling_equivalence());
  report(3, "policy gradients", gradient_check());
  report(4, "loss identities", loss_identities());
  report(8, "pathfinding sandwich", pathfinding_sandwich());
  if (quick) return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;

  const auto t_dataset = Clock::now();
  episodes::DatasetConfig dcfg;
  dcfg.num_envs = 20;
  dcfg.seed = 1;
  dcfg.episodes_per_question = 5;
  const auto ds = episodes::build_dataset(dcfg, 0);
  std::vector<const episodes::Episode*> tr, va, te, all;
  for (const auto& e : ds.episodes.at("train")) tr.push_back(&e);
  for (const auto& e : ds.episodes.at("val")) va.push_back(&e);
  for (const auto& e : ds.episodes.at("test")) te.push_back(&e);
  all.insert(all.end(), tr.begin(), tr.end());
  all.insert(all.end(), va.begin(), va.end());
  all.insert(all.end(), te.begin(), te.end());
  std::printf("  dataset: %zu envs, %zu episodes (train %zu, val %zu, test %zu), inflection ratio %.3f, %.1f s\n",
              ds.scenes.size(), all.size(), tr.size(), va.size(), te.size(), ds.manifest.inflection.ratio,
              seconds_since(t_dataset));

  imitation::FeaturePipeline fp;
  fp.view = dcfg.episode.view;
  fp.render = dcfg.episode.render;
  const auto cache = imitation::compute_features(ds, all, fp, 0);
  const auto tr_seq = imitation::make_sequences(tr, cache);
  const auto va_seq = imitation::make_sequences(va, cache);
  const auto te_seq = imitation::make_sequences(te, cache);

  std::vector<episodes::Question> train_questions;
  const auto& train_envs = ds.manifest.splits.at("train");
  for (const auto& q : ds.questions) {
    if (std::find(train_envs.begin(), train_envs.end(), q.env_id) != train_envs.end()) {
      train_questions.push_back(q);
    }
  }
  const eval::AnswerPrior prior(train_questions);
  eval::EvalConfig ecfg;
  ecfg.motion = dcfg.episode.motion;
  ecfg.view = dcfg.episode.view;
  ecfg.render = dcfg.episode.render;

  // Criterion 5: IW vs unweighted memory policies, three seeds.
  std::vector<PolicyRun> runs;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    for (bool iw : {true, false}) {
      imitation::PolicyConfig pc;
      pc.feature_dim = fp.features.dim();
      imitation::TrainConfig tc;
      tc.epochs = 30;
      tc.seed = seed;
      tc.inflection_weighting = iw;
      auto res = imitation::train(tr_seq, va_seq, pc, tc);
      const auto stats = imitation::evaluate_sequences(res.policy, te_seq, res.inflection_ratio);
      runs.push_back({seed, iw, fmt("memory-%s-s%d", iw ? "iw" : "plain", static_cast<int>(seed)),
                      std::move(res.policy), stats.accuracy.inflection_recall(), stats.accuracy.accuracy()});
    }
  }
  std::vector<eval::EvalJob> jobs;
  for (const auto& r : runs) {
    const auto* run = &r;
    jobs.push_back({r.id, [run, &fp] {
                      return std::make_unique<eval::PolicyNavigator>(run->id, run->policy, fp.features, fp.view);
                    }});
  }
  jobs.push_back({"expert", [] { return std::make_unique<eval::ExpertNavigator>(); }});
  jobs.push_back({"forward-only", [] { return std::make_unique<eval::ForwardOnlyNavigator>(); }});
  jobs.push_back({"random", [] { return std::make_unique<eval::RandomNavigator>(0x52414e44); }});
  const auto records = eval::evaluate(ds, te, jobs, {10, 30, 50}, ecfg, prior, &cache, 0);
  const auto means = eval::compute_metrics(records);
  const double secs5 = seconds_since(t_dataset);

  {
    int wins = 0;
    std::string detail;
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      const PolicyRun* a = nullptr;
      const PolicyRun* b = nullptr;
      for (const auto& r : runs) {
        if (r.seed == seed) (r.iw ? a : b) = &r;
      }
      const double da = means.at({a->id, 30}).at("dT");
      const double db = means.at({b->id, 30}).at("dT");
      const bool ok = da < db && a->recall > b->recall;
      wins += ok ? 1 : 0;
      detail += fmt("seed %d dT %.3f vs %.3f, recall %.3f vs %.3f; ", static_cast<int>(seed), da, db,
                    a->recall, b->recall);
    }
    const bool big_enough = ds.scenes.size() >= 20 && all.size() >= 150;
    report(5, "inflection weighting",
           {wins == 3 && big_enough && secs5 < 1800.0,
            fmt("%d/3 seeds (IW vs plain at T-30) ", wins) + detail + fmt("%.0f s total", secs5)});
  }

  // Criterion 6: repeat-previous-action oracle with an independent recount.
  {
    std::vector<std::vector<Action>> trajs;
    for (const auto* e : all) trajs.push_back(e->expert_actions);
    const auto acc = imitation::repeat_previous_oracle(trajs);
    uint64_t steps = 0, correct = 0, infl = 0, infl_hit = 0;
    for (const auto& a : trajs) {
      for (std::size_t t = 0; t < a.size(); ++t) {
        const Action pred = t == 0 ? Action::Forward : a[t - 1];
        ++steps;
        correct += pred == a[t] ? 1 : 0;
        if (t > 0 && a[t] != a[t - 1]) {
          ++infl;
          infl_hit += pred == a[t] ? 1 : 0;
        }
      }
    }
    const bool counts = acc.steps == steps && acc.correct == correct && acc.inflections == infl &&
                        acc.inflections_correct == infl_hit;
    report(6, "repeat-previous oracle",
           {counts && acc.accuracy() >= 0.8 && acc.inflection_recall() == 0.0,
            fmt("accuracy %.4f over %llu steps, inflection recall %.4f over %llu inflections, recount %s",
                acc.accuracy(), static_cast<unsigned long long>(acc.steps), acc.inflection_recall(),
                static_cast<unsigned long long>(acc.inflections), counts ? "matches" : "differs")});
  }

  // Criterion 7: metric identities over every record.
  {
    std::size_t bad_delta = 0, bad_min = 0, bad_expert = 0, failed = 0, expert_n = 0;
    for (const auto& r : records) {
      if (r.failed) {
        ++failed;
        continue;
      }
      bad_delta += r.dDelta == r.d0 - r.dT ? 0 : 1;
      bad_min += r.dmin <= r.dT ? 0 : 1;
      if (r.navigator == "expert") {
        ++expert_n;
        if (std::abs(r.iou_T - 1.0) > 1e-6 || r.dT > ecfg.motion.forward_step) ++bad_expert;
      }
    }
    report(7, "metric identities",
           {bad_delta == 0 && bad_min == 0 && bad_expert == 0 && failed == 0 && expert_n > 0,
            fmt("%zu records: %zu dDelta, %zu dmin, %zu expert (of %zu) violations, %zu failed",
                records.size(), bad_delta, bad_min, bad_expert, expert_n, failed)});
  }

  // Criterion 9: forward-only against the best trained policy at T-10.
  const auto rep = eval::build_report(records, 0.90, 2000, 1);
  {
    double best = kInf;
    std::string best_id;
    for (const auto& r : runs) {
      const double d = means.at({r.id, 10}).at("dT");
      if (d < best) {
        best = d;
        best_id = r.id;
      }
    }
    const double fwd = means.at({"forward-only", 10}).at("dT");
    const double rnd = means.at({"random", 10}).at("dT");
    const double d0 = means.at({"forward-only", 10}).at("d0");
    std::printf("  comparison table (T-10):\n");
    const std::string table = eval::comparison_table(rep, 10);
    std::size_t pos = 0;
    while (pos < table.size()) {
      const auto nl = table.find('\n', pos);
      std::printf("    %s\n", table.substr(pos, nl - pos).c_str());
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
    report(9, "baseline strength",
           {fwd <= 2.0 * best,
            fmt("T-10 mean dT: forward-only %.3f, best policy %.3f (%s), ratio %.3f (bound 2); "
                "random %.3f; d0 %.3f",
                fwd, best, best_id.c_str(), fwd / best, rnd, d0)});
  }

  // Criterion 10: bootstrap sanity.
  {
    bool constant_ok = true;
    for (double c : {0.0, 0.3, -2.5, 1e6}) {
      for (std::size_t n : {2u, 7u, 50u}) {
        const auto [lo, hi] = eval::bootstrap_ci(std::vector<double>(n, c), 0.90, 2000, n);
        constant_ok = constant_ok && lo == c && hi == c;
      }
    }
    std::size_t cells = 0, contain_bad = 0;
    for (const auto& [key, metrics] : rep.cells) {
      for (const auto& [name, cell] : metrics) {
        ++cells;
        if (!(cell.lo <= cell.mean && cell.mean <= cell.hi)) ++contain_bad;
      }
    }
    const double w1 = mean_ci_width(100, 40, 11);
    const double w4 = mean_ci_width(400, 40, 12);
    const double ratio = w1 / w4;
    report(10, "bootstrap sanity",
           {constant_ok && contain_bad == 0 && std::abs(ratio - 2.0) <= 0.5,
            fmt("constant samples %s; %zu/%zu report cells contain the mean; width n=100 / n=400 = %.3f "
                "(target 2 +- 25%%)",
                constant_ok ? "zero-width" : "NOT zero-width", cells - contain_bad, cells, ratio)});
  }

  std::printf("acceptance: %d of 10 criteria failed\n", failures);
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
