#pragma once

#include "eqa/dataset.hpp"
#include "eqa/episodes.hpp"
#include "eqa/features.hpp"
#include "eqa/policy.hpp"
#include "eqa/rng.hpp"
#include "eqa/trainer.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace eqa::eval {

using episodes::Episode;
using episodes::Question;
using episodes::Scene;
using imitation::FeatureConfig;

// Expert state with exactly `offset` expert actions remaining, or nullopt when
// the episode is shorter than `offset`.
std::optional<AgentState> evaluation_start_state(const Episode& episode, int offset);

struct NavContext {
  const Scene* scene = nullptr;
  const Episode* episode = nullptr;
  int offset = 0;
  std::size_t start_index = 0;          // expert index of the start state
  std::optional<Action> previous;       // expert action before the start
  const Eigen::MatrixXd* expert_features = nullptr;  // D x T, may be null
};

struct StepInput {
  const render::Observation* observation = nullptr;  // null unless needs_observation()
  AgentState state;
  std::optional<Action> previous;
  int t = 0;
};

class Navigator {
 public:
  virtual ~Navigator() = default;
  virtual std::string id() const = 0;
  virtual bool needs_observation() const { return false; }
  virtual void reset(const NavContext& ctx) = 0;
  virtual Action act(const StepInput& in) = 0;
};

// Replays the expert actions from the start state.
class ExpertNavigator : public Navigator {
 public:
  std::string id() const override { return "expert"; }
  void reset(const NavContext& ctx) override;
  Action act(const StepInput& in) override;

 private:
  const Episode* episode_ = nullptr;
  std::size_t start_ = 0;
};

class ForwardOnlyNavigator : public Navigator {
 public:
  std::string id() const override { return "forward-only"; }
  void reset(const NavContext&) override {}
  Action act(const StepInput&) override { return Action::Forward; }
};

// Uniform over all four actions; stream seeded per (seed, episode, offset).
class RandomNavigator : public Navigator {
 public:
  explicit RandomNavigator(uint64_t seed) : seed_(seed) {}
  std::string id() const override { return "random"; }
  void reset(const NavContext& ctx) override;
  Action act(const StepInput& in) override;

 private:
  uint64_t seed_;
  std::optional<Rng> rng_;
};

// Argmax of a trained policy over handcrafted features. The recurrent state
// (or frame window) is warmed up on the expert prefix the agent was walked
// along.
class PolicyNavigator : public Navigator {
 public:
  PolicyNavigator(std::string id, const imitation::Policy& policy, FeatureConfig features,
                  episodes::ViewConfig view);
  std::string id() const override { return id_; }
  bool needs_observation() const override { return true; }
  void reset(const NavContext& ctx) override;
  Action act(const StepInput& in) override;

 private:
  std::string id_;
  const imitation::Policy* policy_;
  FeatureConfig features_;
  episodes::ViewConfig view_;
  uint32_t target_ = 0;
  imitation::Policy::State state_;
};

using NavigatorFactory = std::function<std::unique_ptr<Navigator>()>;

struct EvalConfig {
  int max_steps = 100;
  MotionConfig motion;
  episodes::ViewConfig view;
  render::RenderConfig render;

  void validate() const;
};

struct EpisodeRecord {
  std::string navigator;
  std::string episode_id;
  int offset = 0;
  std::vector<AgentState> states;  // start state first
  std::vector<Action> actions;
  double d0 = 0.0;
  double dT = 0.0;
  double dmin = 0.0;
  double dDelta = 0.0;
  double collision_fraction = 0.0;
  double iou_T = 0.0;
  bool qa_correct = false;
  uint32_t steps = 0;
  bool failed = false;
  std::string error;
};

// Most frequent train answer per question signature; lexicographic ties;
// unseen signatures fall back to the global mode.
class AnswerPrior {
 public:
  AnswerPrior() = default;
  explicit AnswerPrior(const std::vector<Question>& train_questions);
  std::string answer(const Question& q) const;

 private:
  std::map<std::string, std::string> by_signature_;
  std::string global_;
};

std::string answer_prior_qa(const Question& question, const AnswerPrior& prior);

// Runs one navigator from the T-offset start state. Returns nullopt when the
// episode is too short. Navigator exceptions produce a failed record.
std::optional<EpisodeRecord> run_episode(const Scene& scene, Navigator& navigator,
                                         const Episode& episode, int offset,
                                         const EvalConfig& config, const AnswerPrior& prior,
                                         const Eigen::MatrixXd* expert_features = nullptr);

struct EvalJob {
  std::string navigator;
  NavigatorFactory factory;
};

// Every (navigator, offset, episode) combination, evaluated in parallel.
// Records are sorted by navigator, offset and episode id. Skips are appended
// to *skipped when non-null.
std::vector<EpisodeRecord> evaluate(const episodes::Dataset& dataset,
                                    const std::vector<const Episode*>& episodes,
                                    const std::vector<EvalJob>& navigators,
                                    const std::vector<int>& offsets, const EvalConfig& config,
                                    const AnswerPrior& prior,
                                    const imitation::FeatureCache* features, unsigned jobs,
                                    std::vector<std::string>* skipped = nullptr);

inline constexpr std::array<const char*, 7> kMetricNames{
    "d0", "dT", "dmin", "dDelta", "collision", "iou_T", "qa_top1"};

double metric_value(const EpisodeRecord& r, std::string_view metric);

struct GroupKey {
  std::string navigator;
  int offset = 0;
  auto operator<=>(const GroupKey&) const = default;
};

using GroupMeans = std::map<std::string, double>;  // metric -> mean

// Means of every metric per (navigator, offset) over successful records.
// Throws DataError for an empty group.
std::map<GroupKey, GroupMeans> compute_metrics(const std::vector<EpisodeRecord>& records);

// Percentile bootstrap of the mean. Resamples are taken of the deviations
// from the sample mean, so constant samples give a zero-width interval.
std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, double level = 0.90,
                                       int resamples = 2000, uint64_t seed = 0);

// Type 7 sample quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct MetricCell {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

struct MetricsReport {
  std::map<GroupKey, std::map<std::string, MetricCell>> cells;
  double level = 0.90;
  int resamples = 2000;
  uint64_t seed = 0;
};

MetricsReport build_report(const std::vector<EpisodeRecord>& records, double level = 0.90,
                           int resamples = 2000, uint64_t seed = 0);

// navigator,offset,metric,mean,lo,hi,n
std::string report_to_csv(const MetricsReport& report);
std::string report_to_json(const MetricsReport& report, const std::string& config_hash = {});
// navigator,offset,episode_id,metric,value
std::string records_to_long_csv(const std::vector<EpisodeRecord>& records);
// Mean d_T per navigator at `offset` against forward-only, as CSV with the
// ratio forward-only / best trained policy.
std::string comparison_table(const MetricsReport& report, int offset = 10);

std::string records_to_jsonl(const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> records_from_jsonl(const std::string& text);

}  // namespace eqa::eval
