#include "eqa/eval.hpp"

#include "eqa/error.hpp"
#include "eqa/parallel.hpp"
#include "eqa/pathfind.hpp"
#include "eqa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace eqa::eval {

std::optional<AgentState> evaluation_start_state(const Episode& episode, int offset) {
  if (offset < 0) throw ConfigError("evaluation offset must be >= 0");
  const auto T = static_cast<long>(episode.expert_actions.size());
  if (T < offset) return std::nullopt;
  return episode.expert_states[static_cast<std::size_t>(T - offset)];
}

void ExpertNavigator::reset(const NavContext& ctx) {
  episode_ = ctx.episode;
  start_ = ctx.start_index;
}

Action ExpertNavigator::act(const StepInput& in) {
  const std::size_t i = start_ + static_cast<std::size_t>(in.t);
  return i < episode_->expert_actions.size() ? episode_->expert_actions[i] : Action::Stop;
}

void RandomNavigator::reset(const NavContext& ctx) {
  rng_.emplace(mix_seed(mix_seed(seed_, fnv1a64(ctx.episode->episode_id)),
                        static_cast<uint64_t>(ctx.offset)));
}

Action RandomNavigator::act(const StepInput&) {
  return static_cast<Action>(rng_->uniform_int(kNumActions));
}

PolicyNavigator::PolicyNavigator(std::string id, const imitation::Policy& policy,
                                 FeatureConfig features, episodes::ViewConfig view)
    : id_(std::move(id)), policy_(&policy), features_(features), view_(view) {
  if (policy.config().feature_dim != features_.dim()) {
    throw ConfigError("policy input dimension does not match the feature configuration");
  }
}

void PolicyNavigator::reset(const NavContext& ctx) {
  target_ = ctx.episode->question.target_object_id;
  state_ = policy_->initial_state();
  if (ctx.expert_features != nullptr) {
    const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(ctx.start_index),
                                          ctx.expert_features->cols());
    for (Eigen::Index t = 0; t < n; ++t) policy_->step(state_, ctx.expert_features->col(t));
  }
}

Action PolicyNavigator::act(const StepInput& in) {
  if (in.observation == nullptr) throw InvariantError("policy navigator needs an observation");
  const Eigen::VectorXd x =
      imitation::handcrafted_features(*in.observation, in.state, target_, in.previous, features_, view_);
  const Eigen::VectorXd logits = policy_->step(state_, x);
  Eigen::Index k = 0;
  logits.maxCoeff(&k);
  return static_cast<Action>(k);
}

void EvalConfig::validate() const {
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  motion.validate();
  view.validate();
}

AnswerPrior::AnswerPrior(const std::vector<Question>& train_questions) {
  std::map<std::string, std::map<std::string, int>> by_sig;
  std::map<std::string, int> global;
  for (const auto& q : train_questions) {
    ++by_sig[q.signature()][q.answer];
    ++global[q.answer];
  }
  // std::map iterates answers in lexicographic order; strict > keeps the first.
  const auto mode = [](const std::map<std::string, int>& counts) {
    std::string best;
    int best_n = 0;
    for (const auto& [a, n] : counts) {
      if (n > best_n) {
        best = a;
        best_n = n;
      }
    }
    return best;
  };
  for (const auto& [sig, counts] : by_sig) by_signature_[sig] = mode(counts);
  global_ = mode(global);
}

std::string AnswerPrior::answer(const Question& q) const {
  const auto it = by_signature_.find(q.signature());
  return it != by_signature_.end() ? it->second : global_;
}

std::string answer_prior_qa(const Question& question, const AnswerPrior& prior) {
  return prior.answer(question);
}

namespace {

// Minimum geodesic distance over the trajectory. Euclidean distance is a lower
// bound, so states are visited nearest first and the scan stops early.
double min_geodesic(const Scene& scene, const std::vector<AgentState>& states, const Vec2& goal,
                    double final_distance) {
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    order.emplace_back((states[i].position - goal).norm(), i);
  }
  std::sort(order.begin(), order.end());
  double best = final_distance;
  for (const auto& [euclid, i] : order) {
    if (euclid >= best) break;
    best = std::min(best, scene.geodesic(states[i].position, goal));
  }
  return best;
}

}  // namespace

std::optional<EpisodeRecord> run_episode(const Scene& scene, Navigator& navigator,
                                         const Episode& episode, int offset,
                                         const EvalConfig& config, const AnswerPrior& prior,
                                         const Eigen::MatrixXd* expert_features) {
  const auto start = evaluation_start_state(episode, offset);
  if (!start) return std::nullopt;

  EpisodeRecord rec;
  rec.navigator = navigator.id();
  rec.episode_id = episode.episode_id;
  rec.offset = offset;
  const Vec2 goal = episode.best_view.position;
  const std::size_t start_index = episode.expert_actions.size() - static_cast<std::size_t>(offset);
  std::optional<Action> previous;
  if (start_index > 0) previous = episode.expert_actions[start_index - 1];

  try {
    NavContext ctx{&scene, &episode, offset, start_index, previous, expert_features};
    navigator.reset(ctx);
    AgentState s = *start;
    rec.states.push_back(s);
    int collisions = 0;
    for (int t = 0; t < config.max_steps; ++t) {
      std::optional<render::Observation> obs;
      if (navigator.needs_observation()) obs = scene.renderer().render(s, config.render);
      StepInput in{obs ? &*obs : nullptr, s, previous, t};
      const Action a = navigator.act(in);
      bool hit = false;
      s = path::step_agent(scene.agent_grid(), s, a, config.motion, &hit);
      collisions += hit ? 1 : 0;
      rec.actions.push_back(a);
      rec.states.push_back(s);
      previous = a;
      if (a == Action::Stop) break;
    }
    rec.steps = static_cast<uint32_t>(rec.actions.size());
    rec.collision_fraction =
        rec.actions.empty() ? 0.0 : static_cast<double>(collisions) / rec.actions.size();

    rec.d0 = scene.geodesic(start->position, goal);
    rec.dT = scene.geodesic(s.position, goal);
    rec.dDelta = rec.d0 - rec.dT;
    rec.dmin = min_geodesic(scene, rec.states, goal, rec.dT);

    double best = 0.0;
    const std::size_t n = rec.states.size();
    for (std::size_t k = n > episodes::kIouWindow ? n - episodes::kIouWindow : 0; k < n; ++k) {
      const auto o = scene.renderer().render(rec.states[k], config.render);
      best = std::max(best, episodes::view_iou(o, episode.question.target_object_id, config.view));
    }
    rec.iou_T = episode.expert_iou > 0.0 ? std::clamp(best / episode.expert_iou, 0.0, 1.0) : 0.0;
    rec.qa_correct = answer_prior_qa(episode.question, prior) == episode.question.answer;
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

std::vector<EpisodeRecord> evaluate(const episodes::Dataset& dataset,
                                    const std::vector<const Episode*>& eps,
                                    const std::vector<EvalJob>& navigators,
                                    const std::vector<int>& offsets, const EvalConfig& config,
                                    const AnswerPrior& prior,
                                    const imitation::FeatureCache* features, unsigned jobs,
                                    std::vector<std::string>* skipped) {
  config.validate();
  struct Task {
    std::size_t nav;
    int offset;
    const Episode* ep;
  };
  std::vector<Task> tasks;
  for (std::size_t n = 0; n < navigators.size(); ++n) {
    for (int off : offsets) {
      for (const auto* ep : eps) tasks.push_back({n, off, ep});
    }
  }
  std::vector<std::optional<EpisodeRecord>> out(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const auto& task = tasks[i];
    auto nav = navigators[task.nav].factory();
    const Eigen::MatrixXd* f = nullptr;
    if (features != nullptr) {
      const auto it = features->find(task.ep->episode_id);
      if (it != features->end()) f = &it->second;
    }
    out[i] = run_episode(dataset.scene(task.ep->env_id), *nav, *task.ep, task.offset, config,
                         prior, f);
    if (out[i]) out[i]->navigator = navigators[task.nav].navigator;
  });

  std::vector<EpisodeRecord> records;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (out[i]) {
      records.push_back(std::move(*out[i]));
    } else if (skipped != nullptr) {
      skipped->push_back(navigators[tasks[i].nav].navigator + " T-" +
                         std::to_string(tasks[i].offset) + " " + tasks[i].ep->episode_id +
                         ": expert shorter than offset");
    }
  }
  std::sort(records.begin(), records.end(), [](const EpisodeRecord& a, const EpisodeRecord& b) {
    return std::tie(a.navigator, a.offset, a.episode_id) <
           std::tie(b.navigator, b.offset, b.episode_id);
  });
  return records;
}

double metric_value(const EpisodeRecord& r, std::string_view metric) {
  if (metric == "d0") return r.d0;
  if (metric == "dT") return r.dT;
  if (metric == "dmin") return r.dmin;
  if (metric == "dDelta") return r.dDelta;
  if (metric == "collision") return r.collision_fraction;
  if (metric == "iou_T") return r.iou_T;
  if (metric == "qa_top1") return r.qa_correct ? 1.0 : 0.0;
  throw ConfigError("unknown metric: " + std::string(metric));
}

namespace {

// Mean computed around the first sample, exact for constant data.
double shifted_mean(const std::vector<double>& x) {
  const double c = x.front();
  double s = 0.0;
  for (double v : x) s += v - c;
  return c + s / static_cast<double>(x.size());
}

std::map<GroupKey, std::vector<const EpisodeRecord*>> group(
    const std::vector<EpisodeRecord>& records) {
  std::map<GroupKey, std::vector<const EpisodeRecord*>> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.navigator, r.offset}];
    if (!r.failed) g.push_back(&r);
  }
  return groups;
}

std::vector<double> column(const std::vector<const EpisodeRecord*>& g, std::string_view metric) {
  std::vector<double> v;
  v.reserve(g.size());
  for (const auto* r : g) v.push_back(metric_value(*r, metric));
  return v;
}

}  // namespace

std::map<GroupKey, GroupMeans> compute_metrics(const std::vector<EpisodeRecord>& records) {
  std::map<GroupKey, GroupMeans> out;
  for (const auto& [key, g] : group(records)) {
    if (g.empty()) {
      throw DataError("no successful records for " + key.navigator + " at T-" +
                      std::to_string(key.offset));
    }
    for (const char* m : kMetricNames) out[key][m] = shifted_mean(column(g, m));
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, double level,
                                       int resamples, uint64_t seed) {
  if (samples.size() < 2) throw DataError("bootstrap needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0) || resamples < 1) {
    throw ConfigError("bootstrap level must be in (0, 1) and resamples >= 1");
  }
  const double mean = shifted_mean(samples);
  std::vector<double> dev(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) dev[i] = samples[i] - mean;

  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < dev.size(); ++i) s += dev[rng.uniform_int(dev.size())];
    m = s / static_cast<double>(dev.size());
  }
  std::sort(means.begin(), means.end());
  const double a = (1.0 - level) / 2.0;
  // The interval is widened to the sample mean in the rare skewed case where
  // both percentiles fall on one side of it.
  const double lo = mean + std::min(0.0, quantile_sorted(means, a));
  const double hi = mean + std::max(0.0, quantile_sorted(means, 1.0 - a));
  return {lo, hi};
}

MetricsReport build_report(const std::vector<EpisodeRecord>& records, double level,
                           int resamples, uint64_t seed) {
  MetricsReport rep;
  rep.level = level;
  rep.resamples = resamples;
  rep.seed = seed;
  for (const auto& [key, g] : group(records)) {
    if (g.empty()) {
      throw DataError("no successful records for " + key.navigator + " at T-" +
                      std::to_string(key.offset));
    }
    for (const char* m : kMetricNames) {
      const auto v = column(g, m);
      MetricCell c;
      c.n = v.size();
      c.mean = shifted_mean(v);
      if (v.size() >= 2) {
        const uint64_t s = mix_seed(mix_seed(seed, fnv1a64(key.navigator + "|" + m)),
                                    static_cast<uint64_t>(key.offset));
        std::tie(c.lo, c.hi) = bootstrap_ci(v, level, resamples, s);
      } else {
        c.lo = c.hi = c.mean;
      }
      rep.cells[key][m] = c;
    }
  }
  return rep;
}

}  // namespace eqa::eval
