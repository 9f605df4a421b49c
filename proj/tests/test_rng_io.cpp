#include "eqa/env_io.hpp"
#include "eqa/error.hpp"
#include "eqa/parallel.hpp"
#include "eqa/rng.hpp"
#include "eqa/tensor_io.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <stdexcept>

using namespace eqa;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformIntStaysInRangeAndCoversIt) {
  Rng rng(1);
  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.uniform_int(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMomentsAreStandard) {
  Rng rng(3);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, MixSeedSeparatesChildren) {
  std::set<uint64_t> seeds;
  for (uint64_t i = 0; i < 1000; ++i) seeds.insert(mix_seed(7, i));
  EXPECT_EQ(seeds.size(), 1000u);
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(Rng, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(TensorIo, RoundTripPreservesNamesShapesAndData) {
  TensorMap m;
  m["w"] = Tensor{{2, 3}, {1, 2, 3, 4, 5, 6}};
  m["b"] = Tensor{{3}, {-1.5f, 0.f, 2.25f}};
  m["scalar"] = Tensor{{}, {7.f}};
  const auto back = decode_tensors(encode_tensors(m));
  ASSERT_EQ(back.size(), 3u);
  for (const auto& [name, t] : m) {
    EXPECT_EQ(back.at(name).shape, t.shape);
    EXPECT_EQ(back.at(name).data, t.data);
  }
}

TEST(TensorIo, RejectsBadMagicAndTruncation) {
  TensorMap m;
  m["x"] = Tensor{{4}, {1, 2, 3, 4}};
  auto bytes = encode_tensors(m);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_tensors(truncated), DataError);
  bytes[0] = 'X';
  EXPECT_THROW(decode_tensors(bytes), DataError);
}

TEST(TensorIo, RequireTensorChecksShape) {
  TensorMap m;
  m["x"] = Tensor{{2, 2}, {1, 2, 3, 4}};
  EXPECT_NO_THROW(require_tensor(m, "x", {2, 2}));
  EXPECT_THROW(require_tensor(m, "x", {4}), DataError);
  EXPECT_THROW(require_tensor(m, "y", {2, 2}), DataError);
}

TEST(TensorIo, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "eqa_tensor_roundtrip.eqaw";
  TensorMap m;
  m["a"] = Tensor{{1, 2}, {0.5f, -0.5f}};
  save_tensors(path, m);
  EXPECT_EQ(load_tensors(path).at("a").data, m.at("a").data);
  std::filesystem::remove(path);
}

TEST(CloudIo, EncodedSizeAndRoundTrip) {
  env::PointCloud c;
  c.push_back(Vec3f(1, 2, 3), Rgb{10, 20, 30}, 5);
  c.push_back(Vec3f(-1, 0.5f, 9), Rgb{255, 0, 1}, 0);
  const auto bytes = env::encode_cloud(c);
  EXPECT_EQ(bytes.size(), env::kCloudHeaderBytes + 2 * env::kCloudRecordBytes);
  const auto back = env::decode_cloud(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.positions, c.positions);
  EXPECT_EQ(back.colors, c.colors);
  EXPECT_EQ(back.semantic, c.semantic);
}

TEST(CloudIo, RejectsTruncatedPayload) {
  env::PointCloud c;
  c.push_back(Vec3f(1, 2, 3), Rgb{1, 2, 3}, 1);
  auto bytes = env::encode_cloud(c);
  bytes.pop_back();
  EXPECT_THROW(env::decode_cloud(bytes), DataError);
}

TEST(Parallel, EveryIndexRunsOnce) {
  std::vector<int> hits(500, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Parallel, RethrowsLowestFailingIndex) {
  try {
    parallel_for(100, 3, [](std::size_t i) {
      if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "17");
  }
}
