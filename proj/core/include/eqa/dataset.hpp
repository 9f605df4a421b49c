#pragma once

#include "eqa/env_model.hpp"
#include "eqa/episodes.hpp"
#include "eqa/imitation.hpp"
#include "eqa/questions.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace eqa::episodes {

inline constexpr std::array<const char*, 3> kSplitNames{"train", "val", "test"};

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const;
};

struct DatasetConfig {
  int num_envs = 20;
  uint64_t seed = 1;
  env::EnvGenSpec env_spec;
  SceneConfig scene;
  EpisodeConfig episode;
  SplitSpec split;
  double entropy_threshold = 0.5;
  int questions_per_env = 3;  // 0 keeps every surviving question
  int episodes_per_question = 15;
  int spawn_attempts = 4;  // per episode before it is skipped

  void validate() const;
};

struct DatasetManifest {
  std::map<std::string, std::vector<std::string>> splits;  // split -> env ids
  std::map<std::string, std::size_t> episode_counts;       // split -> episodes
  std::vector<std::string> answer_vocabulary;
  imitation::InflectionStats inflection;
  std::vector<std::string> skipped;  // logged generation failures
  std::string config_hash;
};

struct Dataset {
  std::vector<std::unique_ptr<Scene>> scenes;
  std::vector<Question> questions;
  std::map<std::string, std::vector<Episode>> episodes;  // split -> episodes
  DatasetManifest manifest;

  const Scene& scene(const std::string& env_id) const;
};

// Environment-disjoint assignment of env ids to splits (seeded shuffle).
std::map<std::string, std::vector<std::string>> split_environments(
    const std::vector<std::string>& env_ids, const SplitSpec& spec, uint64_t seed);

// Generates environments, questions and expert episodes. `jobs` workers.
Dataset build_dataset(const DatasetConfig& config, unsigned jobs = 1);

// Episodes for the given questions over already built scenes.
std::vector<Episode> build_episodes(const std::vector<const Scene*>& scenes,
                                    const std::vector<Question>& questions,
                                    const DatasetConfig& config, unsigned jobs,
                                    std::vector<std::string>* skipped);

// Fills vocabulary, counts and inflection statistics from the episodes.
void finalize_manifest(Dataset& dataset);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

// Directory layout: envs/<env id>.json (+ .eqac), questions.json,
// episodes_<split>.jsonl and manifest.json.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir, const SceneConfig& scene,
                     std::string* config_hash = nullptr);

std::string questions_to_json(const std::vector<Question>& questions);
std::vector<Question> questions_from_json(const std::string& text);

}  // namespace eqa::episodes
