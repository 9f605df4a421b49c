// eqa-forge: command line front end for the simulator, expert, trainer and
// evaluation pipeline.
#include "selftest.hpp"

#include "eqa/config.hpp"
#include "eqa/dataset.hpp"
#include "eqa/env_io.hpp"
#include "eqa/error.hpp"
#include "eqa/eval.hpp"
#include "eqa/parallel.hpp"
#include "eqa/pc_render.hpp"
#include "eqa/questions.hpp"
#include "eqa/tensor_io.hpp"
#include "eqa/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace eqa;
using nlohmann::json;
using episodes::Question;
using episodes::QuestionFilterStats;
using episodes::generate_questions;

namespace {

struct Globals {
  std::string config_path;
  unsigned jobs = 0;
  bool print_config = false;
};

RunConfig load_run_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  cfg.finalize();
  if (apply_seed_override(cfg)) std::cerr << "seed overridden by EQA_FORGE_SEED: " << cfg.seed << "\n";
  return cfg;
}

void warn_hash(const std::string& what, const std::string& stored, const std::string& current) {
  if (!stored.empty() && stored != current) {
    std::cerr << "warning: " << what << " was produced with config " << stored
              << ", current config is " << current << "\n";
  }
}

std::vector<const episodes::Episode*> split_episodes(const episodes::Dataset& ds,
                                                     const std::string& split) {
  const auto it = ds.episodes.find(split);
  if (it == ds.episodes.end()) throw ConfigError("unknown split " + split);
  std::vector<const episodes::Episode*> out;
  for (const auto& e : it->second) out.push_back(&e);
  return out;
}

std::vector<Question> split_questions(const episodes::Dataset& ds, const std::string& split) {
  const auto& ids = ds.manifest.splits.at(split);
  std::vector<Question> out;
  for (const auto& q : ds.questions) {
    if (std::find(ids.begin(), ids.end(), q.env_id) != ids.end()) out.push_back(q);
  }
  return out;
}

imitation::FeaturePipeline pipeline_of(const RunConfig& cfg) {
  return {cfg.features, cfg.dataset.episode.view, cfg.dataset.episode.render};
}

AgentState parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("pose must be x,y,heading");
    }
  }
  if (v.size() != 3) throw ConfigError("pose must be x,y,heading");
  AgentState s;
  s.position = Vec2(v[0], v[1]);
  s.heading = wrap_angle(v[2]);
  return s;
}

imitation::Policy load_policy(const std::string& path) {
  return imitation::Policy::from_tensors(load_tensors(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eqa-forge: procedural point-cloud EmbodiedQA toolkit"};
  app.footer(
      "Environment:\n  EQA_FORGE_SEED  overrides the config seed\n"
      "Exit codes: 0 success, 2 config error, 3 data error, 4 invariant or selftest failure");
  app.require_subcommand(0, 1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run config (unknown keys are rejected)");
  app.add_option("--jobs", g.jobs, "Worker threads for generation and evaluation (0 = all cores)");
  app.add_flag("--print-config", g.print_config, "Print the full default-filled config and exit");

  // gen-env
  auto* gen_env = app.add_subcommand("gen-env", "Generate environments");
  std::optional<uint64_t> env_seed;
  int env_count = 1;
  std::string env_out = "envs";
  gen_env->add_option("--seed", env_seed, "Base seed (default: config seed)");
  gen_env->add_option("--count", env_count, "Number of environments")->check(CLI::PositiveNumber);
  gen_env->add_option("--out", env_out, "Output directory");

  // render
  auto* render_cmd = app.add_subcommand("render", "Render one observation");
  std::string render_env, render_pose, render_out = "obs";
  std::string render_mode;
  render_cmd->add_option("--env", render_env, "Environment JSON")->required();
  render_cmd->add_option("--pose", render_pose, "x,y,heading (radians)")->required();
  render_cmd->add_option("--out", render_out, "Output prefix (.eqac and .json)");
  render_cmd->add_option("--mode", render_mode, "Occlusion mode")->check(CLI::IsMember({"raster", "ray"}));

  // gen-questions
  auto* gen_q = app.add_subcommand("gen-questions", "Instantiate and entropy-filter questions");
  std::string q_envs = "envs", q_out = "questions.json";
  gen_q->add_option("--envs", q_envs, "Directory of environment JSON files");
  gen_q->add_option("--out", q_out, "Output file");

  // gen-episodes
  auto* gen_ep = app.add_subcommand("gen-episodes", "Build a full dataset: envs, questions, expert episodes");
  std::string data_out = "data";
  gen_ep->add_option("--out", data_out, "Dataset directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "Behavior cloning on expert episodes");
  std::string train_data = "data", train_out = "policy.eqaw", train_curve;
  std::string train_kind;
  bool no_iw = false;
  std::optional<uint64_t> train_seed;
  std::optional<int> train_epochs;
  std::optional<double> train_lr;
  train_cmd->add_option("--data", train_data, "Dataset directory");
  train_cmd->add_option("--out", train_out, "Checkpoint path");
  train_cmd->add_option("--curve", train_curve, "Training curve CSV (default <out>.curve.csv)");
  train_cmd->add_option("--kind", train_kind, "Policy kind")->check(CLI::IsMember({"reactive", "memory"}));
  train_cmd->add_flag("--no-iw", no_iw, "Plain cross-entropy instead of inflection weighting");
  train_cmd->add_option("--seed", train_seed, "Training seed");
  train_cmd->add_option("--epochs", train_epochs, "Epochs");
  train_cmd->add_option("--lr", train_lr, "Learning rate");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a navigator under the T-k protocol");
  std::string eval_data = "data", eval_nav, eval_ckpt, eval_split = "test", eval_out, eval_name;
  std::vector<int> eval_offsets;
  eval_cmd->add_option("--data", eval_data, "Dataset directory");
  eval_cmd->add_option("--navigator", eval_nav, "Navigator")
      ->required()
      ->check(CLI::IsMember({"expert", "forward-only", "random", "policy"}));
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Policy checkpoint (navigator policy)");
  eval_cmd->add_option("--name", eval_name, "Navigator id in records (default policy-<kind>)");
  eval_cmd->add_option("--offset", eval_offsets, "Offsets k (default: config offsets)");
  eval_cmd->add_option("--split", eval_split, "Split")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--out", eval_out, "Records JSONL output");

  // report
  auto* report_cmd = app.add_subcommand("report", "Aggregate records into CSV/JSON reports");
  std::vector<std::string> report_in;
  std::string report_out = "report";
  int report_cmp_offset = 10;
  report_cmd->add_option("--records", report_in, "Records JSONL files")->required();
  report_cmd->add_option("--out", report_out, "Output directory");
  report_cmd->add_option("--compare-offset", report_cmp_offset, "Offset of the comparison table");

  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_run_config(g);
    const unsigned jobs = resolve_jobs(g.jobs);
    const std::string hash = config_hash(cfg);

    if (g.print_config) {
      std::cout << config_to_json(cfg);
      return 0;
    }

    if (*gen_env) {
      const uint64_t seed = env_seed.value_or(cfg.seed);
      std::vector<env::Environment> envs(static_cast<std::size_t>(env_count));
      parallel_for(envs.size(), jobs, [&](std::size_t i) {
        envs[i] = env::generate_environment(cfg.dataset.env_spec, mix_seed(seed, i + 1));
      });
      fs::create_directories(env_out);
      for (const auto& e : envs) {
        env::save_environment(e, fs::path(env_out) / (e.id + ".json"), hash);
        std::cout << e.id << " rooms=" << e.rooms.size() << " objects=" << e.objects.size()
                  << " points=" << e.global_cloud.size() << "\n";
      }
      return 0;
    }

    if (*render_cmd) {
      std::string stored;
      const auto e = env::load_environment(render_env, &stored);
      warn_hash("environment", stored, hash);
      auto rc = cfg.dataset.episode.render;
      if (render_mode == "ray") rc.mode = render::OcclusionMode::Ray;
      if (render_mode == "raster") rc.mode = render::OcclusionMode::Raster;
      const auto pose = parse_pose(render_pose);
      const render::Renderer renderer(e, rc.cell_size);
      const auto obs = renderer.render(pose, rc);
      render::save_observation(obs, pose, render_out + ".eqac", render_out + ".json");
      std::cout << "points=" << obs.cloud.size() << " visible=" << obs.visible_count
                << " bin=" << int(obs.sparsity_bin) << "\n";
      return 0;
    }

    if (*gen_q) {
      std::vector<fs::path> files;
      for (const auto& de : fs::directory_iterator(q_envs)) {
        if (de.path().extension() == ".json") files.push_back(de.path());
      }
      std::sort(files.begin(), files.end());
      if (files.size() < 2) throw DataError("gen-questions needs at least 2 environments");
      std::vector<env::Environment> envs;
      for (const auto& f : files) envs.push_back(env::load_environment(f));
      std::vector<const env::Environment*> ptrs;
      for (const auto& e : envs) ptrs.push_back(&e);
      QuestionFilterStats stats;
      const auto qs = generate_questions(ptrs, cfg.dataset.entropy_threshold, &stats);
      env::write_text_file(q_out, episodes::questions_to_json(qs));
      std::cout << "instantiated=" << stats.instantiated << " kept=" << stats.kept << "\n";
      for (const auto& [sig, h] : stats.entropy_by_signature) std::cout << "  " << sig << " " << h << "\n";
      return 0;
    }

    if (*gen_ep) {
      auto ds = episodes::build_dataset(cfg.dataset, jobs);
      ds.manifest.config_hash = hash;
      episodes::save_dataset(ds, data_out);
      env::write_text_file(fs::path(data_out) / "config.json", config_to_json(cfg));
      for (const auto& [split, n] : ds.manifest.episode_counts) std::cout << split << "=" << n << " ";
      std::cout << "inflection_ratio=" << ds.manifest.inflection.ratio
                << " skipped=" << ds.manifest.skipped.size() << "\n";
      for (const auto& s : ds.manifest.skipped) std::cerr << "skipped: " << s << "\n";
      return 0;
    }

    if (*train_cmd) {
      std::string stored;
      const auto ds = episodes::load_dataset(train_data, cfg.dataset.scene, &stored);
      warn_hash("dataset", stored, hash);
      if (!train_kind.empty()) cfg.policy.kind = imitation::parse_policy_kind(train_kind);
      if (no_iw) cfg.train.inflection_weighting = false;
      if (train_seed) cfg.train.seed = *train_seed;
      if (train_epochs) cfg.train.epochs = *train_epochs;
      if (train_lr) cfg.train.learning_rate = *train_lr;
      cfg.validate();
      const auto tr = split_episodes(ds, "train");
      const auto va = split_episodes(ds, "val");
      std::vector<const episodes::Episode*> both(tr);
      both.insert(both.end(), va.begin(), va.end());
      const auto cache = imitation::compute_features(ds, both, pipeline_of(cfg), jobs);
      const auto result = imitation::train(imitation::make_sequences(tr, cache),
                                           imitation::make_sequences(va, cache), cfg.policy,
                                           cfg.train);
      save_tensors(train_out, result.policy.to_tensors());
      json meta{{"config_hash", hash},
                {"kind", std::string(imitation::name(cfg.policy.kind))},
                {"inflection_weighting", cfg.train.inflection_weighting},
                {"inflection_ratio", result.inflection_ratio},
                {"seed", cfg.train.seed}};
      env::write_text_file(train_out + ".json", meta.dump(2) + "\n");
      env::write_text_file(train_curve.empty() ? train_out + ".curve.csv" : train_curve,
                           imitation::curve_to_csv(result.curve));
      const auto& last = result.curve.back();
      std::cout << "epochs=" << last.epoch << " train_loss=" << last.train.iw_loss
                << " val_loss=" << last.val.iw_loss << " val_acc=" << last.val.accuracy.accuracy()
                << " val_inflection_recall=" << last.val.accuracy.inflection_recall() << "\n";
      return 0;
    }

    if (*eval_cmd) {
      std::string stored;
      const auto ds = episodes::load_dataset(eval_data, cfg.dataset.scene, &stored);
      warn_hash("dataset", stored, hash);
      const auto eps = split_episodes(ds, eval_split);
      const std::vector<int> offsets = eval_offsets.empty() ? cfg.offsets : eval_offsets;
      const eval::AnswerPrior prior(split_questions(ds, "train"));

      imitation::Policy policy;
      std::optional<imitation::FeatureCache> cache;
      eval::EvalJob job;
      if (eval_nav == "expert") {
        job = {"expert", [] { return std::make_unique<eval::ExpertNavigator>(); }};
      } else if (eval_nav == "forward-only") {
        job = {"forward-only", [] { return std::make_unique<eval::ForwardOnlyNavigator>(); }};
      } else if (eval_nav == "random") {
        const uint64_t s = mix_seed(cfg.seed, 0x52414e44);
        job = {"random", [s] { return std::make_unique<eval::RandomNavigator>(s); }};
      } else {
        if (eval_ckpt.empty()) throw ConfigError("--checkpoint is required for the policy navigator");
        policy = load_policy(eval_ckpt);
        const auto meta_path = eval_ckpt + ".json";
        if (fs::exists(meta_path)) {
          warn_hash("checkpoint", json::parse(env::read_text_file(meta_path)).value("config_hash", ""), hash);
        }
        const std::string id = eval_name.empty()
                                   ? "policy-" + std::string(imitation::name(policy.config().kind))
                                   : eval_name;
        cache = imitation::compute_features(ds, eps, pipeline_of(cfg), jobs);
        const auto fc = cfg.features;
        const auto view = cfg.eval.view;
        job = {id, [&policy, fc, view, id] {
                 return std::make_unique<eval::PolicyNavigator>(id, policy, fc, view);
               }};
      }
      std::vector<std::string> skipped;
      const auto records = eval::evaluate(ds, eps, {job}, offsets, cfg.eval, prior,
                                          cache ? &*cache : nullptr, jobs, &skipped);
      for (const auto& s : skipped) std::cerr << "skipped: " << s << "\n";
      std::size_t failed = 0;
      for (const auto& r : records) {
        if (r.failed) {
          ++failed;
          std::cerr << "failed: " << r.episode_id << " T-" << r.offset << ": " << r.error << "\n";
        }
      }
      const std::string out = eval_out.empty() ? "records_" + job.navigator + ".jsonl" : eval_out;
      env::write_text_file(out, eval::records_to_jsonl(records));
      std::cout << eval::report_to_csv(eval::build_report(records, cfg.bootstrap.level,
                                                          cfg.bootstrap.resamples, cfg.seed));
      return failed == records.size() && !records.empty() ? 4 : 0;
    }

    if (*report_cmd) {
      std::vector<eval::EpisodeRecord> records;
      for (const auto& f : report_in) {
        auto r = eval::records_from_jsonl(env::read_text_file(f));
        records.insert(records.end(), r.begin(), r.end());
      }
      std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.navigator, a.offset, a.episode_id) <
               std::tie(b.navigator, b.offset, b.episode_id);
      });
      const auto rep = eval::build_report(records, cfg.bootstrap.level, cfg.bootstrap.resamples, cfg.seed);
      fs::create_directories(report_out);
      const fs::path dir(report_out);
      env::write_text_file(dir / "report.csv", eval::report_to_csv(rep));
      env::write_text_file(dir / "report.json", eval::report_to_json(rep, hash));
      env::write_text_file(dir / "report_long.csv", eval::records_to_long_csv(records));
      const auto table = eval::comparison_table(rep, report_cmp_offset);
      env::write_text_file(dir / "comparison.csv", table);
      std::cout << table;
      return 0;
    }

    if (*selftest_cmd) {
      return tools::run_selftest(std::cout) == 0 ? 0 : 4;
    }

    std::cout << app.help();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NoPathError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
