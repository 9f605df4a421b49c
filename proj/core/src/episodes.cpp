#include "eqa/episodes.hpp"

#include "eqa/env_io.hpp"
#include "eqa/error.hpp"
#include "eqa/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace eqa::episodes {

using nlohmann::json;

namespace {

int heading_count(double step) {
  return std::max(1, static_cast<int>(std::lround(2.0 * std::numbers::pi / step)));
}

// Marks the mask cells covered by the splat of every camera-frame point.
void splat(std::vector<uint8_t>& mask, const Vec3& c, const render::Camera& camera, double spacing,
           const ViewConfig& cfg) {
  if (!(c.z() > 0.0)) return;
  const int r = cfg.mask_resolution;
  const Vec2 n = camera.ndc(c);
  const double u = 0.5 * (n.x() + 1.0);
  const double v = 0.5 * (1.0 - n.y());
  const double hu = spacing / (4.0 * c.z() * camera.tan_half_h());
  const double hv = spacing / (4.0 * c.z() * camera.tan_half_v());
  const int i0 = std::max(0, static_cast<int>(std::floor((u - hu) * r)));
  const int i1 = std::min(r - 1, static_cast<int>(std::ceil((u + hu) * r)) - 1);
  const int j0 = std::max(0, static_cast<int>(std::floor((v - hv) * r)));
  const int j1 = std::min(r - 1, static_cast<int>(std::ceil((v + hv) * r)) - 1);
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) mask[static_cast<std::size_t>(j) * r + i] = 1;
  }
}

json pose_json(const AgentState& s) { return json::array({s.position.x(), s.position.y(), s.heading}); }

AgentState pose_of(const json& j) {
  AgentState s;
  s.position = Vec2(j.at(0).get<double>(), j.at(1).get<double>());
  s.heading = j.at(2).get<double>();
  return s;
}

}  // namespace

Scene::Scene(env::Environment env, const SceneConfig& config)
    : env_(std::make_unique<env::Environment>(std::move(env))), config_(config) {
  if (!(config.planning_clearance >= 0.0)) throw ConfigError("planning_clearance must be >= 0");
  renderer_ = std::make_unique<render::Renderer>(*env_, config.cell_size);
  agent_grid_ = env::occupancy_grid(*env_, config.grid_resolution, config.agent_radius);
  planning_grid_ = env::occupancy_grid(*env_, config.grid_resolution,
                                       config.agent_radius + config.planning_clearance);
  int ncomp = 0;
  planning_labels_ = env::free_components(planning_grid_, &ncomp);
  if (ncomp > 0) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(ncomp), 0);
    for (int l : planning_labels_) {
      if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
    }
    main_label_ = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  }
  for (int iy = 0; iy < planning_grid_.height; ++iy) {
    for (int ix = 0; ix < planning_grid_.width; ++ix) {
      if (planning_labels_[planning_grid_.index(ix, iy)] == main_label_) spawn_cells_.push_back({ix, iy});
    }
  }
  const auto& sem = env_->global_cloud.semantic;
  for (uint32_t i = 0; i < sem.size(); ++i) {
    if (sem[i] != 0) object_points_[sem[i]].push_back(i);
  }
}

bool Scene::in_main_component(const Vec2& p) const {
  if (!planning_grid_.contains(p)) return false;
  auto [ix, iy] = planning_grid_.cell_of(p);
  ix = std::min(ix, planning_grid_.width - 1);
  iy = std::min(iy, planning_grid_.height - 1);
  return planning_labels_[planning_grid_.index(ix, iy)] == main_label_;
}

const std::vector<uint32_t>& Scene::object_points(uint32_t object_id) const {
  static const std::vector<uint32_t> empty;
  const auto it = object_points_.find(object_id);
  return it == object_points_.end() ? empty : it->second;
}

double Scene::geodesic(const Vec2& a, const Vec2& b) const {
  const bool swap = std::lexicographical_compare(b.data(), b.data() + 2, a.data(), a.data() + 2);
  const std::array<double, 4> key = swap ? std::array<double, 4>{b.x(), b.y(), a.x(), a.y()}
                                         : std::array<double, 4>{a.x(), a.y(), b.x(), b.y()};
  {
    std::lock_guard lock(geo_mutex_);
    if (auto it = geo_cache_.find(key); it != geo_cache_.end()) return it->second;
  }
  const double d = path::geodesic_distance(agent_grid_, a, b);
  std::lock_guard lock(geo_mutex_);
  geo_cache_.emplace(key, d);
  return d;
}

void ViewConfig::validate() const {
  if (mask_resolution < 1) throw ConfigError("mask_resolution must be >= 1");
  if (!(box_width > 0.0 && box_height > 0.0 && box_u0 >= 0.0 && box_v0 >= 0.0 &&
        box_u0 + box_width <= 1.0 && box_v0 + box_height <= 1.0)) {
    throw ConfigError("view box must lie inside the unit image square");
  }
  if (!(radius > 0.0)) throw ConfigError("candidate radius must be positive");
  if (!(pos_step > 0.0 && ang_step > 0.0)) throw ConfigError("candidate steps must be positive");
}

std::vector<uint8_t> target_mask(const render::Observation& obs, uint32_t target_id,
                                 const ViewConfig& config) {
  const int r = config.mask_resolution;
  std::vector<uint8_t> mask(static_cast<std::size_t>(r) * r, 0);
  for (std::size_t i = 0; i < obs.cloud.size(); ++i) {
    if (obs.cloud.semantic[i] != target_id || target_id == 0) continue;
    splat(mask, obs.camera_points[i].cast<double>(), obs.camera, obs.point_spacing, config);
  }
  return mask;
}

double mask_iou(const std::vector<uint8_t>& mask, const ViewConfig& config) {
  const int r = config.mask_resolution;
  if (mask.size() != static_cast<std::size_t>(r) * r) throw ConfigError("mask size mismatch");
  const double cell = 1.0 / r;
  const double u1 = config.box_u0 + config.box_width;
  const double v1 = config.box_v0 + config.box_height;
  double inter = 0.0, area = 0.0;
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < r; ++i) {
      if (!mask[static_cast<std::size_t>(j) * r + i]) continue;
      area += cell * cell;
      const double ou = std::min((i + 1) * cell, u1) - std::max(i * cell, config.box_u0);
      const double ov = std::min((j + 1) * cell, v1) - std::max(j * cell, config.box_v0);
      if (ou > 0.0 && ov > 0.0) inter += ou * ov;
    }
  }
  if (area == 0.0) return 0.0;
  const double uni = area + config.box_width * config.box_height - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double view_iou(const render::Observation& obs, uint32_t target_id, const ViewConfig& config) {
  return mask_iou(target_mask(obs, target_id, config), config);
}

double score_view(const Scene& scene, uint32_t target_id, const AgentState& pose,
                  const ViewConfig& view, const render::RenderConfig& rcfg) {
  const auto& obj = scene.env().object(target_id);
  const render::Camera camera = render::make_camera(pose, rcfg);
  const double spacing = 1.0 / std::sqrt(scene.env().point_density);

  // Cheap rejection: the projected box (plus splat margin) misses the view box.
  bool all_front = true;
  double zmin = kInf;
  Vec2 lo(kInf, kInf), hi(-kInf, -kInf);
  for (int k = 0; k < 8; ++k) {
    const Vec3 w((k & 1) ? obj.box.hi.x() : obj.box.lo.x(), (k & 2) ? obj.box.hi.y() : obj.box.lo.y(),
                 (k & 4) ? obj.box.hi.z() : obj.box.lo.z());
    const Vec3 c = camera.to_camera(w);
    if (c.z() < camera.near) {
      all_front = false;
      break;
    }
    zmin = std::min(zmin, c.z());
    const Vec2 n = camera.ndc(c);
    const Vec2 uv(0.5 * (n.x() + 1.0), 0.5 * (1.0 - n.y()));
    lo = lo.cwiseMin(uv);
    hi = hi.cwiseMax(uv);
  }
  if (all_front) {
    const double mu = spacing / (zmin * camera.tan_half_h()) + 2.0 / view.mask_resolution;
    const double mv = spacing / (zmin * camera.tan_half_v()) + 2.0 / view.mask_resolution;
    if (hi.x() + mu < view.box_u0 || lo.x() - mu > view.box_u0 + view.box_width ||
        hi.y() + mv < view.box_v0 || lo.y() - mv > view.box_v0 + view.box_height) {
      return 0.0;
    }
  }

  const auto visible = scene.renderer().visible_subset(camera, rcfg, scene.object_points(target_id));
  if (visible.empty()) return 0.0;
  const auto& cloud = scene.env().global_cloud;
  std::vector<uint8_t> mask(static_cast<std::size_t>(view.mask_resolution) * view.mask_resolution, 0);
  for (uint32_t i : visible) {
    splat(mask, camera.to_camera(cloud.positions[i].cast<double>()).cast<float>().cast<double>(),
          camera, spacing, view);
  }
  return mask_iou(mask, view);
}

std::vector<ScoredView> candidate_views(const Scene& scene, uint32_t target_id,
                                        const ViewConfig& view, const render::RenderConfig& rcfg) {
  view.validate();
  const auto& obj = scene.env().object(target_id);
  const Vec2 c = obj.box.footprint().center();
  const Vec2 lo = scene.env().bounds.lo.head<2>();
  const int nh = heading_count(view.ang_step);
  const double s = view.pos_step;
  const int i0 = static_cast<int>(std::floor((c.x() - view.radius - lo.x()) / s - 0.5));
  const int i1 = static_cast<int>(std::ceil((c.x() + view.radius - lo.x()) / s - 0.5));
  const int j0 = static_cast<int>(std::floor((c.y() - view.radius - lo.y()) / s - 0.5));
  const int j1 = static_cast<int>(std::ceil((c.y() + view.radius - lo.y()) / s - 0.5));
  std::vector<ScoredView> out;
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      const Vec2 p = lo + s * Vec2(i + 0.5, j + 0.5);
      const double dist = (p - c).norm();
      if (dist > view.radius || !scene.in_main_component(p)) continue;
      for (int h = 0; h < nh; ++h) {
        ScoredView v;
        v.pose.position = p;
        v.pose.heading = wrap_angle(h * view.ang_step);
        v.distance = dist;
        v.iou = score_view(scene, target_id, v.pose, view, rcfg);
        out.push_back(v);
      }
    }
  }
  return out;
}

ScoredView best_view(const std::vector<ScoredView>& candidates) {
  if (candidates.empty()) throw GenerationError("no candidate views for the target");
  const ScoredView* best = &candidates.front();
  for (const auto& v : candidates) {
    if (v.iou > best->iou || (v.iou == best->iou && (v.distance < best->distance ||
                                                     (v.distance == best->distance &&
                                                      v.pose.heading < best->pose.heading)))) {
      best = &v;
    }
  }
  if (!(best->iou > 0.0)) throw GenerationError("target is not visible from any candidate view");
  return *best;
}

Episode generate_episode(const Scene& scene, const Question& question, const ScoredView& best,
                         uint64_t spawn_seed, const EpisodeConfig& config) {
  config.motion.validate();
  if (scene.spawn_cells().empty()) throw GenerationError("scene has no free spawn cells");
  if (!scene.in_main_component(best.pose.position)) {
    throw GenerationError("best view is not in the reachable free space");
  }
  Rng rng(spawn_seed);
  const auto cell = scene.spawn_cells()[rng.uniform_int(scene.spawn_cells().size())];
  Episode ep;
  ep.env_id = scene.env().id;
  ep.question = question;
  ep.spawn_seed = spawn_seed;
  ep.spawn.position = scene.planning_grid().cell_center(cell[0], cell[1]);
  ep.spawn.heading =
      wrap_angle(static_cast<double>(rng.uniform_int(heading_count(config.motion.turn_angle))) *
                 config.motion.turn_angle);
  ep.best_view = best.pose;
  ep.best_view_iou = best.iou;

  const auto path = path::lazy_theta_star(scene.planning_grid(), ep.spawn.position,
                                          best.pose.position);
  path::FollowOptions follow_opts;
  follow_opts.hold_tolerance = config.hold_tolerance;
  if (config.shortcut) follow_opts.shortcut_grid = &scene.planning_grid();
  auto follow = path::follow_path(path, ep.spawn, config.motion, scene.agent_grid(),
                                  best.pose.heading, follow_opts);
  ep.expert_actions = std::move(follow.actions);
  ep.expert_states = std::move(follow.states);
  ep.best_view.step_count = ep.expert_states.back().step_count;

  const int T = static_cast<int>(ep.expert_actions.size());
  for (int off : kEvalOffsets) {
    if (T >= off) {
      ep.d0_cache[off] = scene.geodesic(ep.expert_states[T - off].position, best.pose.position);
    }
  }
  for (int k = std::max(0, T + 1 - kIouWindow); k <= T; ++k) {
    const auto obs = scene.renderer().render(ep.expert_states[k], config.render);
    ep.expert_iou = std::max(ep.expert_iou, view_iou(obs, question.target_object_id, config.view));
  }
  return ep;
}

void validate_episode(const Scene& scene, const Episode& ep, const MotionConfig& motion) {
  if (ep.expert_actions.empty() || ep.expert_actions.back() != Action::Stop) {
    throw InvariantError(ep.episode_id + ": expert must end with stop");
  }
  if (ep.expert_states.size() != ep.expert_actions.size() + 1) {
    throw InvariantError(ep.episode_id + ": expert state count mismatch");
  }
  AgentState s = ep.spawn;
  for (std::size_t t = 0; t < ep.expert_actions.size(); ++t) {
    if (t + 1 < ep.expert_actions.size() && ep.expert_actions[t] == Action::Stop) {
      throw InvariantError(ep.episode_id + ": stop before the final step");
    }
    bool hit = false;
    s = path::step_agent(scene.agent_grid(), s, ep.expert_actions[t], motion, &hit);
    if (hit) throw InvariantError(ep.episode_id + ": expert collides at step " + std::to_string(t));
    if ((s.position - ep.expert_states[t + 1].position).norm() > 1e-9) {
      throw InvariantError(ep.episode_id + ": replay diverges at step " + std::to_string(t));
    }
  }
  if ((s.position - ep.best_view.position).norm() > motion.forward_step + 1e-9) {
    throw InvariantError(ep.episode_id + ": final position too far from the best view");
  }
  if (std::abs(angle_diff(ep.best_view.heading, s.heading)) > 0.5 * motion.turn_angle + 1e-9) {
    throw InvariantError(ep.episode_id + ": final heading not aligned with the best view");
  }
}

std::string episode_to_json(const Episode& ep) {
  json j;
  j["episode_id"] = ep.episode_id;
  j["env_id"] = ep.env_id;
  j["question"] = {{"type", std::string(name(ep.question.qtype))},
                   {"text", ep.question.template_text},
                   {"target_object_id", ep.question.target_object_id},
                   {"target_room_id", ep.question.target_room_id},
                   {"answer", ep.question.answer}};
  j["spawn_seed"] = ep.spawn_seed;
  j["spawn"] = pose_json(ep.spawn);
  j["actions"] = actions_to_string(ep.expert_actions);
  json states = json::array();
  for (const auto& s : ep.expert_states) states.push_back(pose_json(s));
  j["states"] = states;
  j["best_view"] = pose_json(ep.best_view);
  j["best_view_iou"] = ep.best_view_iou;
  j["expert_iou"] = ep.expert_iou;
  json d0 = json::object();
  for (const auto& [off, d] : ep.d0_cache) d0[std::to_string(off)] = d;
  j["d0"] = d0;
  return j.dump();
}

Episode episode_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    Episode ep;
    ep.episode_id = j.at("episode_id").get<std::string>();
    ep.env_id = j.at("env_id").get<std::string>();
    const auto& q = j.at("question");
    ep.question.qtype = parse_question_type(q.at("type").get<std::string>());
    ep.question.template_text = q.at("text").get<std::string>();
    ep.question.env_id = ep.env_id;
    ep.question.target_object_id = q.at("target_object_id").get<uint32_t>();
    ep.question.target_room_id = q.at("target_room_id").get<uint32_t>();
    ep.question.answer = q.at("answer").get<std::string>();
    ep.spawn_seed = j.at("spawn_seed").get<uint64_t>();
    ep.spawn = pose_of(j.at("spawn"));
    ep.expert_actions = actions_from_string(j.at("actions").get<std::string>());
    uint32_t step = 0;
    for (const auto& s : j.at("states")) {
      ep.expert_states.push_back(pose_of(s));
      ep.expert_states.back().step_count = step++;
    }
    ep.best_view = pose_of(j.at("best_view"));
    ep.best_view.step_count = step == 0 ? 0 : step - 1;
    ep.best_view_iou = j.at("best_view_iou").get<double>();
    ep.expert_iou = j.at("expert_iou").get<double>();
    for (const auto& [k, v] : j.at("d0").items()) ep.d0_cache[std::stoi(k)] = v.get<double>();
    if (ep.expert_states.size() != ep.expert_actions.size() + 1) {
      throw DataError("episode " + ep.episode_id + ": state/action count mismatch");
    }
    return ep;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed episode record: ") + e.what());
  }
}

void write_episodes_jsonl(const std::string& path, const std::vector<Episode>& episodes) {
  std::string text;
  for (const auto& ep : episodes) text += episode_to_json(ep) + "\n";
  env::write_text_file(path, text);
}

std::vector<Episode> read_episodes_jsonl(const std::string& path) {
  std::istringstream in(env::read_text_file(path));
  std::vector<Episode> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(episode_from_json(line));
  }
  return out;
}

}  // namespace eqa::episodes
