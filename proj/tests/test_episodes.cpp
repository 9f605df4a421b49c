#include "eqa/dataset.hpp"
#include "eqa/env_model.hpp"
#include "eqa/episodes.hpp"
#include "eqa/error.hpp"
#include "eqa/questions.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <regex>
#include <set>

using namespace eqa;
using namespace eqa::episodes;

namespace {

ViewConfig view_cfg() { return ViewConfig{}; }

// Mask cells whose centres fall in [u0, u1) x [v0, v1).
std::vector<uint8_t> rect_mask(double u0, double v0, double u1, double v1, int res = 40) {
  std::vector<uint8_t> m(static_cast<std::size_t>(res) * res, 0);
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      const double u = (c + 0.5) / res, v = (r + 0.5) / res;
      if (u >= u0 && u < u1 && v >= v0 && v < v1) m[static_cast<std::size_t>(r) * res + c] = 1;
    }
  }
  return m;
}

Question make_q(const std::string& env, QuestionType t, const std::string& tmpl, const std::string& answer) {
  Question q;
  q.env_id = env;
  q.qtype = t;
  q.template_text = tmpl;
  q.answer = answer;
  return q;
}

const Dataset& tiny_dataset() {
  static const Dataset ds = [] {
    DatasetConfig cfg;
    cfg.num_envs = 3;
    cfg.seed = 21;
    cfg.entropy_threshold = 0.0;
    cfg.questions_per_env = 1;
    cfg.episodes_per_question = 2;
    return build_dataset(cfg, 1);
  }();
  return ds;
}

}  // namespace

TEST(MaskIou, EmptyFullAndHalf) {
  const auto v = view_cfg();
  EXPECT_EQ(mask_iou(std::vector<uint8_t>(1600, 0), v), 0.0);
  EXPECT_NEAR(mask_iou(rect_mask(0.25, 0.25, 0.75, 0.85), v), 1.0, 1e-12);
  EXPECT_NEAR(mask_iou(rect_mask(0.25, 0.25, 0.5, 0.85), v), 0.5, 1e-12);
}

TEST(MaskIou, OutsideBoxOnlyIsZero) {
  EXPECT_EQ(mask_iou(rect_mask(0.0, 0.0, 0.2, 0.2), view_cfg()), 0.0);
}

TEST(BestView, SingleCandidateAndTieRules) {
  ScoredView a{AgentState{Vec2(0, 0), 0.5, 0}, 0.4, 2.0};
  EXPECT_EQ(best_view({a}).pose.position, a.pose.position);
  ScoredView near{AgentState{Vec2(1, 0), 1.0, 0}, 0.4, 1.0};
  EXPECT_EQ(best_view({a, near}).distance, 1.0);
  ScoredView low{AgentState{Vec2(1, 0), 0.2, 0}, 0.4, 1.0};
  EXPECT_EQ(best_view({near, low}).pose.heading, 0.2);
  EXPECT_THROW(best_view({}), GenerationError);
  ScoredView zero{AgentState{}, 0.0, 1.0};
  EXPECT_THROW(best_view({zero}), GenerationError);
}

TEST(Questions, UniquenessRulesHold) {
  for (uint64_t seed : {1u, 2u, 3u}) {
    const auto env = env::generate_environment(env::EnvGenSpec{}, seed);
    const auto qs = instantiate_questions(env);
    ASSERT_FALSE(qs.empty());
    for (const auto& q : qs) {
      const auto& obj = env.object(q.target_object_id);
      int same_cat = 0, same_pair = 0;
      for (const auto& o : env.objects) {
        same_cat += o.category == obj.category;
        same_pair += o.category == obj.category &&
                     env.room(o.room_id).room_type == env.room(obj.room_id).room_type;
      }
      if (q.qtype == QuestionType::ColorRoom) {
        EXPECT_EQ(same_pair, 1);
        EXPECT_EQ(q.target_room_id, obj.room_id);
        EXPECT_EQ(q.answer, env::name(obj.color_name));
      } else {
        EXPECT_EQ(same_cat, 1);
        EXPECT_EQ(q.answer, q.qtype == QuestionType::Color ? env::name(obj.color_name)
                                                          : env::name(env.room(obj.room_id).room_type));
      }
    }
  }
}

TEST(Questions, NormalizedEntropyValues) {
  EXPECT_NEAR(normalized_entropy({{"a", 2}, {"b", 1}, {"c", 1}}, 24), 0.75, 1e-12);
  EXPECT_NEAR(normalized_entropy({{"red", 3}, {"blue", 1}, {"green", 1}}, 24), 0.5904362833084089, 1e-12);
  EXPECT_EQ(normalized_entropy({{"x", 5}}, 24), 0.0);
  EXPECT_NEAR(normalized_entropy({{"a", 1}, {"b", 1}}, 24), 1.0, 1e-12);
  EXPECT_NEAR(normalized_entropy({{"a", 4}, {"b", 1}}, 18), 0.31091750708257115, 1e-12);
  EXPECT_EQ(answer_space(QuestionType::Location), 18u);
  EXPECT_EQ(answer_space(QuestionType::Color), 24u);
}

TEST(Questions, SyntheticEntropyFilter) {
  std::vector<Question> qs;
  const char* sofa[] = {"red", "blue", "red", "green", "red"};     // 0.590 keeps
  const char* bed[] = {"bedroom", "bedroom", "bedroom", "bedroom", "bedroom"};  // 0 drops
  const char* sink[] = {"kitchen", "bathroom", "bathroom", "bathroom", "bathroom"};  // 0.311 drops
  const char* cab[] = {"red", "red", "blue", "blue", "white"};     // 0.655 keeps
  for (int e = 0; e < 5; ++e) {
    const std::string env = "env" + std::to_string(e);
    qs.push_back(make_q(env, QuestionType::Color, "what color is the sofa?", sofa[e]));
    qs.push_back(make_q(env, QuestionType::Location, "what room is the bed located in?", bed[e]));
    qs.push_back(make_q(env, QuestionType::Location, "what room is the sink located in?", sink[e]));
    qs.push_back(make_q(env, QuestionType::Color, "what color is the cabinet?", cab[e]));
  }
  QuestionFilterStats stats;
  const auto kept = filter_by_entropy(qs, 0.5, &stats);
  std::set<std::string> sigs;
  for (const auto& q : kept) sigs.insert(q.template_text);
  EXPECT_EQ(sigs, (std::set<std::string>{"what color is the sofa?", "what color is the cabinet?"}));
  EXPECT_EQ(kept.size(), 10u);
  EXPECT_EQ(stats.instantiated, 20u);
  EXPECT_EQ(stats.kept, 10u);
}

TEST(Scene, CandidatesGrowWithRadius) {
  const Scene scene(env::generate_environment(env::EnvGenSpec{}, 5), SceneConfig{});
  const auto q = instantiate_questions(scene.env()).front();
  ViewConfig small = view_cfg(), big = view_cfg();
  small.radius = 1.0;
  big.radius = 1.5;
  const render::RenderConfig rc;
  const auto a = candidate_views(scene, q.target_object_id, small, rc);
  const auto b = candidate_views(scene, q.target_object_id, big, rc);
  ASSERT_FALSE(a.empty());
  EXPECT_GE(b.size(), a.size());
  std::set<std::tuple<double, double, double>> bs;
  for (const auto& v : b) bs.insert({v.pose.position.x(), v.pose.position.y(), v.pose.heading});
  for (const auto& v : a) EXPECT_TRUE(bs.contains({v.pose.position.x(), v.pose.position.y(), v.pose.heading}));
  // best_view agrees with a brute-force scan of the same list.
  const auto best = best_view(b);
  for (const auto& v : b) {
    EXPECT_TRUE(v.iou < best.iou || (v.iou == best.iou && v.distance >= best.distance));
  }
  // Candidate scores match a full render of the pose.
  const auto& s = best.pose;
  const auto obs = scene.renderer().render(s, rc);
  EXPECT_NEAR(view_iou(obs, q.target_object_id, big), best.iou, 1e-9);
}

TEST(Episode, DeterministicValidAndEndsAtBestView) {
  const Scene scene(env::generate_environment(env::EnvGenSpec{}, 8), SceneConfig{});
  const auto q = instantiate_questions(scene.env()).front();
  const EpisodeConfig cfg;
  const auto best = best_view(candidate_views(scene, q.target_object_id, cfg.view, cfg.render));
  const auto a = generate_episode(scene, q, best, 99, cfg);
  const auto b = generate_episode(scene, q, best, 99, cfg);
  EXPECT_EQ(episode_to_json(a), episode_to_json(b));
  EXPECT_NO_THROW(validate_episode(scene, a, cfg.motion));
  EXPECT_EQ(a.expert_states.size(), a.expert_actions.size() + 1);
  EXPECT_EQ(a.expert_actions.back(), Action::Stop);
  const auto& last = a.expert_states.back();
  EXPECT_LE((last.position - best.pose.position).norm(), cfg.motion.forward_step);
  EXPECT_LE(std::abs(angle_diff(best.pose.heading, last.heading)), cfg.motion.turn_angle);
  EXPECT_GT(a.expert_iou, 0.0);
  const auto obs = scene.renderer().render(last, cfg.render);
  EXPECT_LE(view_iou(obs, q.target_object_id, cfg.view), a.expert_iou + 1e-12);
  const auto back = episode_from_json(episode_to_json(a));
  EXPECT_EQ(episode_to_json(back), episode_to_json(a));
}

TEST(Episode, ValidationCatchesTamperedActions) {
  const Scene scene(env::generate_environment(env::EnvGenSpec{}, 8), SceneConfig{});
  const auto q = instantiate_questions(scene.env()).front();
  const EpisodeConfig cfg;
  const auto best = best_view(candidate_views(scene, q.target_object_id, cfg.view, cfg.render));
  auto ep = generate_episode(scene, q, best, 7, cfg);
  ep.expert_actions.insert(ep.expert_actions.begin(), Action::TurnLeft);
  EXPECT_THROW(validate_episode(scene, ep, cfg.motion), InvariantError);
}

TEST(Dataset, SplitsCountsVocabularyAndCaches) {
  const auto& ds = tiny_dataset();
  std::set<std::string> seen;
  for (const auto& [split, ids] : ds.manifest.splits) {
    for (const auto& id : ids) EXPECT_TRUE(seen.insert(id).second) << id << " in two splits";
  }
  EXPECT_EQ(seen.size(), 3u);
  std::set<std::string> answers;
  std::size_t total = 0;
  std::vector<std::vector<Action>> trajs;
  for (const auto& [split, eps] : ds.episodes) {
    EXPECT_EQ(ds.manifest.episode_counts.at(split), eps.size());
    const auto& ids = ds.manifest.splits.at(split);
    for (const auto& e : eps) {
      EXPECT_NE(std::find(ids.begin(), ids.end(), e.env_id), ids.end());
      answers.insert(e.question.answer);
      trajs.push_back(e.expert_actions);
      const auto& scene = ds.scene(e.env_id);
      for (const auto& [offset, d0] : e.d0_cache) {
        const auto k = e.expert_actions.size() - static_cast<std::size_t>(offset);
        EXPECT_EQ(d0, scene.geodesic(e.expert_states[k].position, e.best_view.position));
      }
    }
    total += eps.size();
  }
  // 3 envs x 1 question x 2 episodes, minus logged episode skips
  const std::regex episode_skip(R"( q[0-9]+ e[0-9]+: )");
  const auto skips = std::count_if(ds.manifest.skipped.begin(), ds.manifest.skipped.end(),
                                   [&](const std::string& m) { return std::regex_search(m, episode_skip); });
  EXPECT_EQ(total + static_cast<std::size_t>(skips), 6u);
  EXPECT_EQ(std::set<std::string>(ds.manifest.answer_vocabulary.begin(), ds.manifest.answer_vocabulary.end()),
            answers);
  uint64_t steps = 0, infl = 0;
  for (const auto& a : trajs) {
    for (std::size_t t = 0; t < a.size(); ++t) {
      ++steps;
      infl += (t == 0 || a[t] != a[t - 1]) ? 1 : 0;
    }
  }
  EXPECT_EQ(ds.manifest.inflection.total_steps, steps);
  EXPECT_EQ(ds.manifest.inflection.inflection_count, infl);
  EXPECT_DOUBLE_EQ(ds.manifest.inflection.ratio, static_cast<double>(steps) / infl);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto& ds = tiny_dataset();
  const auto dir = std::filesystem::temp_directory_path() / "eqa_dataset_roundtrip";
  std::filesystem::remove_all(dir);
  auto copy_manifest = ds.manifest;
  save_dataset(ds, dir);
  const auto back = load_dataset(dir, SceneConfig{});
  EXPECT_EQ(manifest_to_json(back.manifest), manifest_to_json(copy_manifest));
  EXPECT_EQ(questions_to_json(back.questions), questions_to_json(ds.questions));
  for (const auto& [split, eps] : ds.episodes) {
    ASSERT_EQ(back.episodes.at(split).size(), eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
      EXPECT_EQ(episode_to_json(back.episodes.at(split)[i]), episode_to_json(eps[i]));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(Dataset, SplitEnvironmentsIsDisjointAndSeeded) {
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("env" + std::to_string(i));
  const auto a = split_environments(ids, SplitSpec{}, 4);
  const auto b = split_environments(ids, SplitSpec{}, 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.at("train").size(), 12u);
  EXPECT_EQ(a.at("val").size(), 4u);
  EXPECT_EQ(a.at("test").size(), 4u);
  std::set<std::string> all;
  for (const auto& [k, v] : a) all.insert(v.begin(), v.end());
  EXPECT_EQ(all.size(), 20u);
}

TEST(Dataset, ConfigValidation) {
  DatasetConfig cfg;
  cfg.num_envs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  SplitSpec s{0.5, 0.5, 0.5};
  EXPECT_THROW(s.validate(), ConfigError);
}
