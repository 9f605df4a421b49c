#include "eqa/tensor_io.hpp"

#include "eqa/env_io.hpp"
#include "eqa/error.hpp"

#include <cstring>

namespace eqa {
namespace {

template <typename T>
void put(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("truncated EQAW tensor file");
  }

  std::span<const uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string shape_string(const std::vector<uint64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

uint64_t Tensor::numel() const {
  uint64_t n = 1;
  for (uint64_t d : shape) n *= d;
  return n;
}

std::vector<uint8_t> encode_tensors(const TensorMap& tensors) {
  std::vector<uint8_t> out{'E', 'Q', 'A', 'W'};
  put<uint32_t>(out, kTensorFileVersion);
  put<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (t.numel() != t.data.size()) throw InvariantError("tensor " + name + " shape/data mismatch");
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    for (uint64_t d : t.shape) put<uint64_t>(out, d);
    const auto* p = reinterpret_cast<const uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + t.data.size() * sizeof(float));
  }
  return out;
}

TensorMap decode_tensors(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (r.string(4) != "EQAW") throw DataError("not an EQAW tensor file");
  const auto version = r.get<uint32_t>();
  if (version != kTensorFileVersion) {
    throw DataError("unsupported EQAW version " + std::to_string(version));
  }
  const auto count = r.get<uint32_t>();
  TensorMap out;
  for (uint32_t i = 0; i < count; ++i) {
    const auto name = r.string(r.get<uint32_t>());
    Tensor t;
    t.shape.resize(r.get<uint32_t>());
    for (auto& d : t.shape) d = r.get<uint64_t>();
    t.data.resize(t.numel());
    r.floats(t.data.data(), t.data.size());
    if (!out.emplace(name, std::move(t)).second) throw DataError("duplicate tensor " + name);
  }
  if (!r.done()) throw DataError("trailing bytes in EQAW tensor file");
  return out;
}

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors) {
  env::write_file_bytes(path, encode_tensors(tensors));
}

TensorMap load_tensors(const std::filesystem::path& path) {
  return decode_tensors(env::read_file_bytes(path));
}

const Tensor& require_tensor(const TensorMap& tensors, const std::string& name,
                             const std::vector<uint64_t>& shape) {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("missing tensor " + name);
  if (it->second.shape != shape) {
    throw DataError("tensor " + name + " has shape " + shape_string(it->second.shape) +
                    ", expected " + shape_string(shape));
  }
  return it->second;
}

}  // namespace eqa
