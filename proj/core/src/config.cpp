#include "eqa/config.hpp"

#include "eqa/error.hpp"
#include "eqa/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace eqa {

using nlohmann::json;

namespace {

// Each struct lists its fields once; the same listing drives reading and
// writing.
template <class V> void fields(V& v, env::EnvGenSpec& s) {
  v("width", s.width);
  v("depth", s.depth);
  v("wall_height", s.wall_height);
  v("num_rooms", s.num_rooms);
  v("min_objects_per_room", s.min_objects_per_room);
  v("max_objects_per_room", s.max_objects_per_room);
  v("door_width", s.door_width);
  v("min_room_side", s.min_room_side);
  v("point_density", s.point_density);
  v("wall_margin", s.wall_margin);
  v("object_gap", s.object_gap);
  v("door_clearance", s.door_clearance);
  v("validation_radius", s.validation_radius);
  v("validation_resolution", s.validation_resolution);
  v("max_retries", s.max_retries);
}

template <class V> void fields(V& v, episodes::SceneConfig& s) {
  v("grid_resolution", s.grid_resolution);
  v("agent_radius", s.agent_radius);
  v("planning_clearance", s.planning_clearance);
  v("cell_size", s.cell_size);
}

template <class V> void fields(V& v, MotionConfig& s) {
  v("forward_step", s.forward_step);
  v("turn_angle", s.turn_angle);
}

template <class V> void fields(V& v, episodes::ViewConfig& s) {
  v("mask_resolution", s.mask_resolution);
  v("box_u0", s.box_u0);
  v("box_v0", s.box_v0);
  v("box_width", s.box_width);
  v("box_height", s.box_height);
  v("radius", s.radius);
  v("pos_step", s.pos_step);
  v("ang_step", s.ang_step);
}

template <class V> void fields(V& v, render::RenderConfig& s) {
  v("vertical_fov", s.vertical_fov);
  v("aspect", s.aspect);
  v("near", s.near);
  v("far", s.far);
  v("eye_height", s.eye_height);
  v("pitch", s.pitch);
  v("epsilon", s.epsilon);
  v("raster_width", s.raster_width);
  v("raster_height", s.raster_height);
  v("mode", s.mode);
  v("max_points", s.max_points);
  v("cell_size", s.cell_size);
  v("two_pass", s.two_pass);
  v("seed", s.seed);
}

template <class V> void fields(V& v, episodes::EpisodeConfig& s) {
  v.object("motion", s.motion);
  v.object("view", s.view);
  v.object("render", s.render);
  v("hold_tolerance", s.hold_tolerance);
  v("shortcut", s.shortcut);
}

template <class V> void fields(V& v, episodes::SplitSpec& s) {
  v("train", s.train);
  v("val", s.val);
  v("test", s.test);
}

template <class V> void fields(V& v, episodes::DatasetConfig& s) {
  v("num_envs", s.num_envs);
  v.object("env", s.env_spec);
  v.object("scene", s.scene);
  v.object("episode", s.episode);
  v.object("split", s.split);
  v("entropy_threshold", s.entropy_threshold);
  v("questions_per_env", s.questions_per_env);
  v("episodes_per_question", s.episodes_per_question);
  v("spawn_attempts", s.spawn_attempts);
}

template <class V> void fields(V& v, imitation::FeatureConfig& s) {
  v("corridor_half_width", s.corridor_half_width);
  v("max_range", s.max_range);
  v("side_range", s.side_range);
  v("floor_height", s.floor_height);
  v("bearing_bins", s.bearing_bins);
}

template <class V> void fields(V& v, imitation::PolicyConfig& s) {
  v("kind", s.kind);
  v("hidden", s.hidden);
  v("layers", s.layers);
  v("window", s.window);
}

template <class V> void fields(V& v, imitation::TrainConfig& s) {
  v("epochs", s.epochs);
  v("batch_size", s.batch_size);
  v("learning_rate", s.learning_rate);
  v("beta1", s.beta1);
  v("beta2", s.beta2);
  v("adam_epsilon", s.adam_epsilon);
  v("grad_clip", s.grad_clip);
  v("inflection_weighting", s.inflection_weighting);
  v("inflection_ratio", s.inflection_ratio);
  v("seed", s.seed);
}

template <class V> void fields(V& v, eval::EvalConfig& s) { v("max_steps", s.max_steps); }

template <class V> void fields(V& v, BootstrapConfig& s) {
  v("level", s.level);
  v("resamples", s.resamples);
}

template <class V> void fields(V& v, RunConfig& s) {
  v("seed", s.seed);
  v.object("dataset", s.dataset);
  v.object("features", s.features);
  v.object("policy", s.policy);
  v.object("train", s.train);
  v.object("eval", s.eval);
  v("offsets", s.offsets);
  v.object("bootstrap", s.bootstrap);
}

json enum_json(render::OcclusionMode m) { return m == render::OcclusionMode::Raster ? "raster" : "ray"; }
json enum_json(imitation::PolicyKind k) { return std::string(imitation::name(k)); }

struct Writer {
  json& j;
  template <class T> void operator()(const char* key, T& value) {
    if constexpr (std::is_enum_v<T>) {
      j[key] = enum_json(value);
    } else {
      j[key] = value;
    }
  }
  template <class T> void object(const char* key, T& value) {
    json sub = json::object();
    Writer w{sub};
    fields(w, value);
    j[key] = sub;
  }
};

struct Reader {
  const json& j;
  std::string path;
  std::set<std::string> seen{};

  template <class T> void operator()(const char* key, T& value) {
    seen.insert(key);
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
      if constexpr (std::is_same_v<T, render::OcclusionMode>) {
        const auto s = it->get<std::string>();
        if (s == "raster") {
          value = render::OcclusionMode::Raster;
        } else if (s == "ray") {
          value = render::OcclusionMode::Ray;
        } else {
          throw ConfigError(path + key + ": expected \"raster\" or \"ray\"");
        }
      } else if constexpr (std::is_same_v<T, imitation::PolicyKind>) {
        value = imitation::parse_policy_kind(it->get<std::string>());
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(path + key + ": expected a boolean");
        value = it->get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError(path + key + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (!it->is_number_unsigned()) throw ConfigError(path + key + ": expected >= 0");
        }
        value = it->get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(path + key + ": expected a number");
        value = it->get<T>();
      } else {
        value = it->get<T>();
      }
    } catch (const json::exception& e) {
      throw ConfigError(path + key + ": " + e.what());
    }
  }

  template <class T> void object(const char* key, T& value) {
    seen.insert(key);
    const auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_object()) throw ConfigError(path + key + ": expected an object");
    Reader r{*it, path + key + "."};
    fields(r, value);
    r.finish();
  }

  void finish() const {
    for (const auto& [k, _] : j.items()) {
      if (!seen.contains(k)) throw ConfigError("unknown config key: " + path + k);
    }
  }
};

}  // namespace

void RunConfig::finalize() {
  dataset.seed = seed;
  eval.motion = dataset.episode.motion;
  eval.view = dataset.episode.view;
  eval.render = dataset.episode.render;
  policy.feature_dim = features.dim();
  validate();
}

void RunConfig::validate() const {
  dataset.validate();
  features.validate();
  policy.validate();
  train.validate();
  eval.validate();
  if (offsets.empty()) throw ConfigError("offsets must not be empty");
  for (int o : offsets) {
    if (o < 1) throw ConfigError("offsets must be >= 1");
  }
  if (!(bootstrap.level > 0.0 && bootstrap.level < 1.0) || bootstrap.resamples < 1) {
    throw ConfigError("bootstrap level must be in (0, 1) and resamples >= 1");
  }
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  Reader r{j, ""};
  fields(r, cfg);
  r.finish();
  cfg.finalize();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& config) {
  RunConfig copy = config;
  json j = json::object();
  Writer w{j};
  fields(w, copy);
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(config))));
  return buf;
}

bool apply_seed_override(RunConfig& config) {
  const char* s = std::getenv("EQA_FORGE_SEED");
  if (s == nullptr || *s == '\0') return false;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0') throw ConfigError("EQA_FORGE_SEED must be an unsigned integer");
  config.seed = v;
  config.finalize();
  return true;
}

}  // namespace eqa
