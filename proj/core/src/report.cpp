#include "eqa/error.hpp"
#include "eqa/eval.hpp"

#include <json.hpp>

#include <cstdio>
#include <limits>
#include <sstream>

namespace eqa::eval {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

bool is_baseline(const std::string& id) {
  return id == "expert" || id == "forward-only" || id == "random";
}

}  // namespace

std::string report_to_csv(const MetricsReport& report) {
  std::string out = "navigator,offset,metric,mean,lo,hi,n\n";
  for (const auto& [key, metrics] : report.cells) {
    for (const char* m : kMetricNames) {
      const auto it = metrics.find(m);
      if (it == metrics.end()) continue;
      const auto& c = it->second;
      out += key.navigator + "," + std::to_string(key.offset) + "," + m + "," + num(c.mean) + "," +
             num(c.lo) + "," + num(c.hi) + "," + std::to_string(c.n) + "\n";
    }
  }
  return out;
}

std::string report_to_json(const MetricsReport& report, const std::string& config_hash) {
  json j;
  j["level"] = report.level;
  j["resamples"] = report.resamples;
  j["seed"] = report.seed;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  json groups = json::array();
  for (const auto& [key, metrics] : report.cells) {
    json g;
    g["navigator"] = key.navigator;
    g["offset"] = key.offset;
    json ms = json::object();
    for (const auto& [m, c] : metrics) {
      ms[m] = {{"mean", c.mean}, {"lo", c.lo}, {"hi", c.hi}, {"n", c.n}};
    }
    g["metrics"] = ms;
    groups.push_back(g);
  }
  j["groups"] = groups;
  return j.dump(2) + "\n";
}

std::string records_to_long_csv(const std::vector<EpisodeRecord>& records) {
  std::string out = "navigator,offset,episode_id,metric,value\n";
  for (const auto& r : records) {
    if (r.failed) continue;
    for (const char* m : kMetricNames) {
      out += r.navigator + "," + std::to_string(r.offset) + "," + r.episode_id + "," + m + "," +
             num(metric_value(r, m)) + "\n";
    }
  }
  return out;
}

std::string comparison_table(const MetricsReport& report, int offset) {
  double best_policy = std::numeric_limits<double>::infinity();
  std::string best_id;
  for (const auto& [key, metrics] : report.cells) {
    if (key.offset != offset || is_baseline(key.navigator)) continue;
    const double d = metrics.at("dT").mean;
    if (d < best_policy) {
      best_policy = d;
      best_id = key.navigator;
    }
  }
  std::string out = "navigator,offset,dT_mean,dT_lo,dT_hi,ratio_to_best_policy\n";
  for (const auto& [key, metrics] : report.cells) {
    if (key.offset != offset) continue;
    const auto& c = metrics.at("dT");
    out += key.navigator + "," + std::to_string(offset) + "," + num(c.mean) + "," + num(c.lo) +
           "," + num(c.hi) + "," + (best_id.empty() ? "nan" : num(c.mean / best_policy)) + "\n";
  }
  return out;
}

std::string records_to_jsonl(const std::vector<EpisodeRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j;
    j["navigator"] = r.navigator;
    j["episode_id"] = r.episode_id;
    j["offset"] = r.offset;
    json states = json::array();
    for (const auto& s : r.states) states.push_back({s.position.x(), s.position.y(), s.heading});
    j["states"] = states;
    j["actions"] = actions_to_string(r.actions);
    j["d0"] = r.d0;
    j["dT"] = r.dT;
    j["dmin"] = r.dmin;
    j["dDelta"] = r.dDelta;
    j["collision_fraction"] = r.collision_fraction;
    j["iou_T"] = r.iou_T;
    j["qa_correct"] = r.qa_correct;
    j["steps"] = r.steps;
    j["failed"] = r.failed;
    if (r.failed) j["error"] = r.error;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<EpisodeRecord> records_from_jsonl(const std::string& text) {
  std::vector<EpisodeRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EpisodeRecord r;
      r.navigator = j.at("navigator").get<std::string>();
      r.episode_id = j.at("episode_id").get<std::string>();
      r.offset = j.at("offset").get<int>();
      for (const auto& s : j.at("states")) {
        AgentState st;
        st.position = Vec2(s.at(0).get<double>(), s.at(1).get<double>());
        st.heading = s.at(2).get<double>();
        r.states.push_back(st);
      }
      r.actions = actions_from_string(j.at("actions").get<std::string>());
      r.d0 = j.at("d0").get<double>();
      r.dT = j.at("dT").get<double>();
      r.dmin = j.at("dmin").get<double>();
      r.dDelta = j.at("dDelta").get<double>();
      r.collision_fraction = j.at("collision_fraction").get<double>();
      r.iou_T = j.at("iou_T").get<double>();
      r.qa_correct = j.at("qa_correct").get<bool>();
      r.steps = j.at("steps").get<uint32_t>();
      r.failed = j.at("failed").get<bool>();
      if (r.failed) r.error = j.value("error", std::string());
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("records line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace eqa::eval
