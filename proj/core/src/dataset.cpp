#include "eqa/dataset.hpp"

#include "eqa/env_io.hpp"
#include "eqa/error.hpp"
#include "eqa/parallel.hpp"
#include "eqa/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace eqa::episodes {

using nlohmann::json;

void SplitSpec::validate() const {
  if (train < 0.0 || val < 0.0 || test < 0.0 || std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
}

void DatasetConfig::validate() const {
  split.validate();
  if (num_envs < 1) throw ConfigError("num_envs must be >= 1");
  if (questions_per_env < 0) throw ConfigError("questions_per_env must be >= 0");
  if (episodes_per_question < 1) throw ConfigError("episodes_per_question must be >= 1");
  if (spawn_attempts < 1) throw ConfigError("spawn_attempts must be >= 1");
  episode.motion.validate();
  episode.view.validate();
}

const Scene& Dataset::scene(const std::string& env_id) const {
  for (const auto& s : scenes) {
    if (s->env().id == env_id) return *s;
  }
  throw DataError("unknown environment " + env_id);
}

std::map<std::string, std::vector<std::string>> split_environments(
    const std::vector<std::string>& env_ids, const SplitSpec& spec, uint64_t seed) {
  spec.validate();
  std::vector<std::string> ids = env_ids;
  std::sort(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, 0x5B117));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_int(i)]);
  const auto n = static_cast<long>(ids.size());
  long n_test = std::lround(spec.test * n);
  long n_val = std::lround(spec.val * n);
  // Keep every requested split non-empty when there are enough environments.
  if (n >= 3) {
    if (spec.test > 0.0) n_test = std::max(1L, n_test);
    if (spec.val > 0.0) n_val = std::max(1L, n_val);
  }
  n_test = std::min(n_test, n);
  n_val = std::min(n_val, n - n_test);
  std::map<std::string, std::vector<std::string>> out;
  for (const char* s : kSplitNames) out[s];
  for (long i = 0; i < n; ++i) {
    const char* split = i < n_test ? "test" : (i < n_test + n_val ? "val" : "train");
    out[split].push_back(ids[static_cast<std::size_t>(i)]);
  }
  for (auto& [_, v] : out) std::sort(v.begin(), v.end());
  return out;
}

namespace {

struct EnvWork {
  const Scene* scene = nullptr;
  std::vector<Question> questions;  // selected, with best views
  std::vector<ScoredView> views;
  std::vector<Episode> episodes;
  std::vector<std::string> skipped;
};

void select_questions(EnvWork& w, const std::vector<Question>& pool, const DatasetConfig& cfg) {
  std::vector<Question> mine;
  for (const auto& q : pool) {
    if (q.env_id == w.scene->env().id) mine.push_back(q);
  }
  Rng rng(mix_seed(w.scene->env().seed, 0x9E57));
  for (std::size_t i = mine.size(); i > 1; --i) std::swap(mine[i - 1], mine[rng.uniform_int(i)]);
  std::map<uint32_t, std::optional<ScoredView>> cache;
  for (const auto& q : mine) {
    if (cfg.questions_per_env > 0 && static_cast<int>(w.questions.size()) >= cfg.questions_per_env) break;
    auto it = cache.find(q.target_object_id);
    if (it == cache.end()) {
      std::optional<ScoredView> view;
      try {
        view = best_view(candidate_views(*w.scene, q.target_object_id, cfg.episode.view,
                                         cfg.episode.render));
      } catch (const GenerationError& e) {
        w.skipped.push_back(w.scene->env().id + " object " + std::to_string(q.target_object_id) +
                            ": " + e.what());
      }
      it = cache.emplace(q.target_object_id, view).first;
    }
    if (!it->second) continue;
    const ScoredView* slot = &*it->second;
    w.questions.push_back(q);
    w.views.push_back(*slot);
  }
}

void make_episodes(EnvWork& w, const DatasetConfig& cfg) {
  for (std::size_t qi = 0; qi < w.questions.size(); ++qi) {
    const Question& q = w.questions[qi];
    const uint64_t qseed = mix_seed(w.scene->env().seed, fnv1a64(q.signature()));
    for (int e = 0; e < cfg.episodes_per_question; ++e) {
      const uint64_t base = mix_seed(qseed, static_cast<uint64_t>(e));
      std::string last_error;
      bool done = false;
      for (int attempt = 0; attempt < cfg.spawn_attempts && !done; ++attempt) {
        const uint64_t seed = attempt == 0 ? base : mix_seed(base, static_cast<uint64_t>(attempt));
        try {
          Episode ep = generate_episode(*w.scene, q, w.views[qi], seed, cfg.episode);
          ep.episode_id = w.scene->env().id + "_q" + std::to_string(qi) + "_e" + std::to_string(e);
          validate_episode(*w.scene, ep, cfg.episode.motion);
          w.episodes.push_back(std::move(ep));
          done = true;
        } catch (const GenerationError& err) {
          last_error = err.what();
        } catch (const NoPathError& err) {
          last_error = err.what();
        }
      }
      if (!done) {
        w.skipped.push_back(w.scene->env().id + " q" + std::to_string(qi) + " e" +
                            std::to_string(e) + ": " + last_error);
      }
    }
  }
}

}  // namespace

std::vector<Episode> build_episodes(const std::vector<const Scene*>& scenes,
                                    const std::vector<Question>& questions,
                                    const DatasetConfig& config, unsigned jobs,
                                    std::vector<std::string>* skipped) {
  config.validate();
  std::vector<EnvWork> work(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) work[i].scene = scenes[i];
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    select_questions(work[i], questions, config);
    make_episodes(work[i], config);
  });
  std::vector<Episode> out;
  for (auto& w : work) {
    std::move(w.episodes.begin(), w.episodes.end(), std::back_inserter(out));
    if (skipped) skipped->insert(skipped->end(), w.skipped.begin(), w.skipped.end());
  }
  return out;
}

Dataset build_dataset(const DatasetConfig& config, unsigned jobs) {
  config.validate();
  Dataset ds;
  std::vector<env::Environment> envs(static_cast<std::size_t>(config.num_envs));
  parallel_for(envs.size(), jobs, [&](std::size_t i) {
    envs[i] = env::generate_environment(config.env_spec, mix_seed(config.seed, i + 1));
  });
  std::set<std::string> seen;
  for (const auto& e : envs) {
    if (!seen.insert(e.id).second) throw InvariantError("duplicate environment id " + e.id);
  }
  ds.scenes.resize(envs.size());
  parallel_for(envs.size(), jobs, [&](std::size_t i) {
    ds.scenes[i] = std::make_unique<Scene>(std::move(envs[i]), config.scene);
  });
  std::vector<const env::Environment*> env_ptrs;
  std::vector<std::string> ids;
  for (const auto& s : ds.scenes) {
    env_ptrs.push_back(&s->env());
    ids.push_back(s->env().id);
  }
  if (env_ptrs.size() >= 2) {
    ds.questions = generate_questions(env_ptrs, config.entropy_threshold);
  } else {
    ds.questions = instantiate_questions(*env_ptrs.front());
  }
  ds.manifest.splits = split_environments(ids, config.split, config.seed);

  std::map<std::string, std::string> split_of;
  for (const auto& [split, list] : ds.manifest.splits) {
    for (const auto& id : list) {
      if (!split_of.emplace(id, split).second) {
        throw InvariantError("environment " + id + " assigned to two splits");
      }
    }
  }
  std::vector<const Scene*> scene_ptrs;
  for (const auto& s : ds.scenes) scene_ptrs.push_back(s.get());
  auto episodes = build_episodes(scene_ptrs, ds.questions, config, jobs, &ds.manifest.skipped);
  for (const char* s : kSplitNames) ds.episodes[s];
  for (auto& ep : episodes) ds.episodes[split_of.at(ep.env_id)].push_back(std::move(ep));
  finalize_manifest(ds);
  return ds;
}

void finalize_manifest(Dataset& ds) {
  std::set<std::string> vocab;
  std::vector<std::vector<Action>> trajectories;
  ds.manifest.episode_counts.clear();
  for (const auto& [split, eps] : ds.episodes) {
    ds.manifest.episode_counts[split] = eps.size();
    for (const auto& ep : eps) {
      vocab.insert(ep.question.answer);
      trajectories.push_back(ep.expert_actions);
    }
  }
  ds.manifest.answer_vocabulary.assign(vocab.begin(), vocab.end());
  if (!trajectories.empty()) ds.manifest.inflection = imitation::inflection_ratio(trajectories);
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "eqa-dataset";
  j["version"] = 1;
  j["config_hash"] = m.config_hash;
  j["splits"] = m.splits;
  j["episode_counts"] = m.episode_counts;
  j["answer_vocabulary"] = m.answer_vocabulary;
  j["inflection"] = {{"total_steps", m.inflection.total_steps},
                     {"inflection_count", m.inflection.inflection_count},
                     {"ratio", m.inflection.ratio}};
  j["skipped"] = m.skipped;
  return j.dump(1);
}

DatasetManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DatasetManifest m;
    m.config_hash = j.value("config_hash", std::string{});
    m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
    m.episode_counts = j.at("episode_counts").get<std::map<std::string, std::size_t>>();
    m.answer_vocabulary = j.at("answer_vocabulary").get<std::vector<std::string>>();
    const auto& inf = j.at("inflection");
    m.inflection.total_steps = inf.at("total_steps").get<uint64_t>();
    m.inflection.inflection_count = inf.at("inflection_count").get<uint64_t>();
    m.inflection.ratio = inf.at("ratio").get<double>();
    m.skipped = j.at("skipped").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset manifest: ") + e.what());
  }
}

std::string questions_to_json(const std::vector<Question>& questions) {
  json arr = json::array();
  for (const auto& q : questions) {
    arr.push_back({{"type", std::string(name(q.qtype))},
                   {"text", q.template_text},
                   {"env_id", q.env_id},
                   {"target_object_id", q.target_object_id},
                   {"target_room_id", q.target_room_id},
                   {"answer", q.answer}});
  }
  return arr.dump(1);
}

std::vector<Question> questions_from_json(const std::string& text) {
  try {
    std::vector<Question> out;
    for (const auto& q : json::parse(text)) {
      out.push_back({parse_question_type(q.at("type").get<std::string>()),
                     q.at("text").get<std::string>(), q.at("env_id").get<std::string>(),
                     q.at("target_object_id").get<uint32_t>(), q.at("target_room_id").get<uint32_t>(),
                     q.at("answer").get<std::string>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed questions file: ") + e.what());
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "envs");
  for (const auto& s : ds.scenes) {
    env::save_environment(s->env(), dir / "envs" / (s->env().id + ".json"), ds.manifest.config_hash);
  }
  env::write_text_file(dir / "questions.json", questions_to_json(ds.questions) + "\n");
  for (const auto& [split, eps] : ds.episodes) {
    write_episodes_jsonl((dir / ("episodes_" + split + ".jsonl")).string(), eps);
  }
  env::write_text_file(dir / "manifest.json", manifest_to_json(ds.manifest) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir, const SceneConfig& scene,
                     std::string* config_hash) {
  Dataset ds;
  ds.manifest = manifest_from_json(env::read_text_file(dir / "manifest.json"));
  if (config_hash) *config_hash = ds.manifest.config_hash;
  std::vector<std::string> ids;
  for (const auto& [_, list] : ds.manifest.splits) ids.insert(ids.end(), list.begin(), list.end());
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    ds.scenes.push_back(
        std::make_unique<Scene>(env::load_environment(dir / "envs" / (id + ".json")), scene));
  }
  ds.questions = questions_from_json(env::read_text_file(dir / "questions.json"));
  for (const char* split : kSplitNames) {
    const auto path = dir / (std::string("episodes_") + split + ".jsonl");
    ds.episodes[split] = std::filesystem::exists(path) ? read_episodes_jsonl(path.string())
                                                       : std::vector<Episode>{};
  }
  return ds;
}

}  // namespace eqa::episodes
