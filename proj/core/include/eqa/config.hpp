#pragma once

#include "eqa/dataset.hpp"
#include "eqa/eval.hpp"
#include "eqa/features.hpp"
#include "eqa/policy.hpp"
#include "eqa/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace eqa {

struct BootstrapConfig {
  double level = 0.90;
  int resamples = 2000;
};

// Every tunable of the pipeline. `seed` drives environment, question and
// episode generation plus the random navigator and the bootstrap.
struct RunConfig {
  uint64_t seed = 1;
  episodes::DatasetConfig dataset;  // dataset.seed mirrors `seed`
  imitation::FeatureConfig features;
  imitation::PolicyConfig policy;
  imitation::TrainConfig train;
  eval::EvalConfig eval;  // motion, view and render come from dataset.episode
  std::vector<int> offsets{10, 30, 50};
  BootstrapConfig bootstrap;

  // Copies shared settings into the nested configs and validates.
  void finalize();
  void validate() const;
};

// Parses JSON; unknown keys anywhere are a ConfigError. Missing keys keep
// their defaults. The result is finalized.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Full config with every key, pretty printed. Stable across runs.
std::string config_to_json(const RunConfig& config);
// 16 hex digits of the FNV-1a hash of config_to_json().
std::string config_hash(const RunConfig& config);

// Applies EQA_FORGE_SEED when set. Returns true when it did.
bool apply_seed_override(RunConfig& config);

}  // namespace eqa
