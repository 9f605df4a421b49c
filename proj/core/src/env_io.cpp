#include "eqa/env_io.hpp"

#include "eqa/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace eqa::env {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

using nlohmann::json;

namespace {

template <typename T>
void put(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const uint8_t> bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json rgb(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

Vec2 vec2(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }
Vec3 vec3(const json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}
Rgb rgb_of(const json& j) {
  return Rgb{j.at(0).get<uint8_t>(), j.at(1).get<uint8_t>(), j.at(2).get<uint8_t>()};
}

}  // namespace

std::vector<uint8_t> encode_cloud(const PointCloud& cloud) {
  if (!cloud.consistent()) throw InvariantError("point cloud arrays are inconsistent");
  std::vector<uint8_t> out;
  out.reserve(kCloudHeaderBytes + cloud.size() * kCloudRecordBytes);
  out.insert(out.end(), {'E', 'Q', 'A', 'C'});
  put<uint32_t>(out, kCloudVersion);
  put<uint64_t>(out, static_cast<uint64_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    put<float>(out, cloud.positions[i].x());
    put<float>(out, cloud.positions[i].y());
    put<float>(out, cloud.positions[i].z());
    out.insert(out.end(), cloud.colors[i].begin(), cloud.colors[i].end());
    put<uint32_t>(out, cloud.semantic[i]);
  }
  return out;
}

PointCloud decode_cloud(std::span<const uint8_t> bytes) {
  if (bytes.size() < kCloudHeaderBytes || std::memcmp(bytes.data(), "EQAC", 4) != 0) {
    throw DataError("not an EQAC point cloud");
  }
  const auto version = get<uint32_t>(bytes, 4);
  if (version != kCloudVersion) {
    throw DataError("unsupported EQAC version " + std::to_string(version));
  }
  const auto count = get<uint64_t>(bytes, 8);
  if (bytes.size() != kCloudHeaderBytes + count * kCloudRecordBytes) {
    throw DataError("EQAC size does not match its point count");
  }
  PointCloud cloud;
  cloud.reserve(count);
  std::size_t off = kCloudHeaderBytes;
  for (uint64_t i = 0; i < count; ++i, off += kCloudRecordBytes) {
    const Vec3f p(get<float>(bytes, off), get<float>(bytes, off + 4), get<float>(bytes, off + 8));
    const Rgb c{bytes[off + 12], bytes[off + 13], bytes[off + 14]};
    cloud.push_back(p, c, get<uint32_t>(bytes, off + 15));
  }
  return cloud;
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file_bytes(path, encode_cloud(cloud));
}

PointCloud read_cloud(const std::filesystem::path& path) { return decode_cloud(read_file_bytes(path)); }

std::string environment_to_json(const Environment& env, const std::string& cloud_file,
                                const std::string& config_hash) {
  json j;
  j["format"] = "eqa-environment";
  j["version"] = 1;
  j["id"] = env.id;
  j["seed"] = env.seed;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["wall_height"] = env.wall_height;
  j["bounds"] = {{"lo", vec(env.bounds.lo)}, {"hi", vec(env.bounds.hi)}};
  json rooms = json::array();
  for (const auto& r : env.rooms) {
    json doors = json::array();
    for (const auto& d : r.door_segments) doors.push_back({{"a", vec(d.a)}, {"b", vec(d.b)}});
    rooms.push_back({{"id", r.room_id},
                     {"type", std::string(name(r.room_type))},
                     {"footprint", {{"lo", vec(r.footprint.lo)}, {"hi", vec(r.footprint.hi)}}},
                     {"doors", doors}});
  }
  j["rooms"] = rooms;
  json objects = json::array();
  for (const auto& o : env.objects) {
    objects.push_back({{"id", o.object_id},
                       {"category", std::string(name(o.category))},
                       {"color", std::string(name(o.color_name))},
                       {"rgb", rgb(o.color_rgb)},
                       {"box", {{"lo", vec(o.box.lo)}, {"hi", vec(o.box.hi)}}},
                       {"room_id", o.room_id}});
  }
  j["objects"] = objects;
  json surfaces = json::array();
  for (const auto& s : env.surfaces) {
    surfaces.push_back({{"axis", s.axis},
                        {"offset", s.offset},
                        {"lo", vec(s.lo)},
                        {"hi", vec(s.hi)},
                        {"owner", s.owner},
                        {"rgb", rgb(s.rgb)}});
  }
  j["surfaces"] = surfaces;
  j["cloud"] = {{"file", cloud_file}, {"count", env.global_cloud.size()},
                {"density", env.point_density}};
  return j.dump(1);
}

void save_environment(const Environment& env, const std::filesystem::path& json_path,
                      const std::string& config_hash) {
  std::filesystem::path cloud_path = json_path;
  cloud_path.replace_extension(".eqac");
  write_cloud(cloud_path, env.global_cloud);
  write_text_file(json_path,
                  environment_to_json(env, cloud_path.filename().string(), config_hash) + "\n");
}

Environment load_environment(const std::filesystem::path& json_path, std::string* config_hash) {
  json j;
  try {
    j = json::parse(read_text_file(json_path));
  } catch (const json::exception& e) {
    throw DataError("invalid environment JSON " + json_path.string() + ": " + e.what());
  }
  try {
    Environment env;
    env.id = j.at("id").get<std::string>();
    env.seed = j.at("seed").get<uint64_t>();
    env.wall_height = j.at("wall_height").get<double>();
    env.bounds = Box3{vec3(j.at("bounds").at("lo")), vec3(j.at("bounds").at("hi"))};
    for (const auto& r : j.at("rooms")) {
      RoomSpec room;
      room.room_id = r.at("id").get<uint32_t>();
      room.room_type = parse_room_type(r.at("type").get<std::string>());
      room.footprint = Box2{vec2(r.at("footprint").at("lo")), vec2(r.at("footprint").at("hi"))};
      for (const auto& d : r.at("doors")) {
        room.door_segments.push_back(DoorSegment{vec2(d.at("a")), vec2(d.at("b"))});
      }
      env.rooms.push_back(std::move(room));
    }
    for (const auto& o : j.at("objects")) {
      ObjectInstance obj;
      obj.object_id = o.at("id").get<uint32_t>();
      obj.category = parse_category(o.at("category").get<std::string>());
      obj.color_name = parse_color(o.at("color").get<std::string>());
      obj.color_rgb = rgb_of(o.at("rgb"));
      obj.box = Box3{vec3(o.at("box").at("lo")), vec3(o.at("box").at("hi"))};
      obj.room_id = o.at("room_id").get<uint32_t>();
      env.objects.push_back(obj);
    }
    for (const auto& s : j.at("surfaces")) {
      env.surfaces.push_back(Rect3{s.at("axis").get<int>(), s.at("offset").get<double>(),
                                   vec2(s.at("lo")), vec2(s.at("hi")), s.at("owner").get<uint32_t>(),
                                   rgb_of(s.at("rgb"))});
    }
    const auto& cloud = j.at("cloud");
    env.point_density = cloud.at("density").get<double>();
    env.global_cloud = read_cloud(json_path.parent_path() / cloud.at("file").get<std::string>());
    if (env.global_cloud.size() != cloud.at("count").get<std::size_t>()) {
      throw DataError("cloud count mismatch for " + json_path.string());
    }
    if (config_hash) *config_hash = j.value("config_hash", std::string{});
    return env;
  } catch (const json::exception& e) {
    throw DataError("malformed environment " + json_path.string() + ": " + e.what());
  }
}

}  // namespace eqa::env
