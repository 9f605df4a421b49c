#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace eqa {

// Named f32 tensor container: "EQAW", u32 version, u32 tensor count, then per
// tensor u32 name length, name bytes, u32 rank, rank x u64 dims, f32 data.
inline constexpr uint32_t kTensorFileVersion = 1;

struct Tensor {
  std::vector<uint64_t> shape;
  std::vector<float> data;

  uint64_t numel() const;
};

using TensorMap = std::map<std::string, Tensor>;

std::vector<uint8_t> encode_tensors(const TensorMap& tensors);
TensorMap decode_tensors(std::span<const uint8_t> bytes);
void save_tensors(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap load_tensors(const std::filesystem::path& path);

// Looks up `name` and checks its shape; throws DataError otherwise.
const Tensor& require_tensor(const TensorMap& tensors, const std::string& name,
                             const std::vector<uint64_t>& shape);

}  // namespace eqa
