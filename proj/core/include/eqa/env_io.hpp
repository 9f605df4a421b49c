#pragma once

#include "eqa/env_model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace eqa::env {

// Binary cloud container: "EQAC", u32 version, u64 count, then per point
// 3 x f32 position, 3 x u8 colour, u32 semantic label. Little-endian, packed.
inline constexpr uint32_t kCloudVersion = 1;
inline constexpr std::size_t kCloudHeaderBytes = 16;
inline constexpr std::size_t kCloudRecordBytes = 19;

std::vector<uint8_t> encode_cloud(const PointCloud& cloud);
PointCloud decode_cloud(std::span<const uint8_t> bytes);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud(const std::filesystem::path& path);

// JSON document for rooms/objects/surfaces; the cloud lives in a sidecar file
// whose name is recorded under "cloud.file".
std::string environment_to_json(const Environment& env, const std::string& cloud_file,
                                const std::string& config_hash = {});

// Writes <path> and <path stem>.eqac next to it.
void save_environment(const Environment& env, const std::filesystem::path& json_path,
                      const std::string& config_hash = {});
Environment load_environment(const std::filesystem::path& json_path,
                             std::string* config_hash = nullptr);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace eqa::env
