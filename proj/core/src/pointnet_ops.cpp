#include "eqa/pointnet_ops.hpp"

#include "eqa/error.hpp"
#include "eqa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eqa::pointnet {
namespace {

Dense random_dense(int in, int out, Rng& rng) {
  Dense d;
  d.w.resize(out, in);
  d.b = Eigen::VectorXf::Zero(out);
  const double scale = std::sqrt(2.0 / in);
  for (int j = 0; j < in; ++j) {
    for (int i = 0; i < out; ++i) d.w(i, j) = static_cast<float>(scale * rng.normal());
  }
  return d;
}

Mlp random_mlp(int in, const std::vector<int>& channels, Rng& rng) {
  Mlp mlp;
  for (int c : channels) {
    mlp.push_back(random_dense(in, c, rng));
    in = c;
  }
  return mlp;
}

Tensor to_tensor(const Eigen::MatrixXf& m) {
  Tensor t;
  t.shape = {static_cast<uint64_t>(m.rows()), static_cast<uint64_t>(m.cols())};
  t.data.resize(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.data[i * m.cols() + j] = m(i, j);
  }
  return t;
}

Eigen::MatrixXf from_tensor(const Tensor& t) {
  const auto rows = static_cast<Eigen::Index>(t.shape[0]);
  const auto cols = static_cast<Eigen::Index>(t.shape[1]);
  Eigen::MatrixXf m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t.data[i * cols + j];
  }
  return m;
}

void put_mlp(TensorMap& out, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    out[prefix + "." + std::to_string(l) + ".w"] = to_tensor(mlp[l].w);
    out[prefix + "." + std::to_string(l) + ".b"] = to_tensor(mlp[l].b);
  }
}

Mlp get_mlp(const TensorMap& tensors, const std::string& prefix, int in,
            const std::vector<int>& channels) {
  Mlp mlp;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    const auto out = static_cast<uint64_t>(channels[l]);
    Dense d;
    d.w = from_tensor(require_tensor(tensors, prefix + "." + std::to_string(l) + ".w",
                                     {out, static_cast<uint64_t>(in)}));
    d.b = from_tensor(require_tensor(tensors, prefix + "." + std::to_string(l) + ".b", {out, 1}));
    mlp.push_back(std::move(d));
    in = channels[l];
  }
  return mlp;
}

double sq_dist(const Vec3f& a, const Vec3f& b) {
  const double dx = static_cast<double>(a.x()) - b.x();
  const double dy = static_cast<double>(a.y()) - b.y();
  const double dz = static_cast<double>(a.z()) - b.z();
  return dx * dx + dy * dy + dz * dz;
}

void check_mlp(const Mlp& mlp, Eigen::Index in, const char* what) {
  if (mlp.empty()) throw ConfigError(std::string(what) + ": empty MLP");
  for (const Dense& d : mlp) {
    if (d.w.cols() != in || d.b.size() != d.w.rows()) {
      throw ConfigError(std::string(what) + ": MLP weight shape mismatch");
    }
    in = d.w.rows();
  }
}

}  // namespace

EncoderConfig EncoderConfig::standard() {
  EncoderConfig c;
  c.levels = {
      {1024, {0.05, 0.1}, {{32, 32, 64}, {32, 64, 128}}},
      {256, {0.1, 0.2, 0.4}, {{64, 128, 128}, {128, 128, 256}, {128, 128, 256, 256}}},
      {64, {0.4, 0.8}, {{128, 128, 128, 256, 256}, {128, 128, 256, 256, 256, 512}}},
  };
  c.global_mlp = {256, 512, 1024};
  return c;
}

EncoderConfig EncoderConfig::small() {
  EncoderConfig c;
  c.group_size = 8;
  c.levels = {
      {64, {0.1, 0.2}, {{8, 16}, {8, 16}}},
      {16, {0.2, 0.4}, {{16, 32}, {16, 32}}},
      {4, {0.4, 0.8}, {{32}, {32}}},
  };
  c.global_mlp = {32, 64};
  c.sparsity_dim = 8;
  return c;
}

void EncoderConfig::validate() const {
  if (input_features < 0) throw ConfigError("input_features must be non-negative");
  if (group_size == 0) throw ConfigError("group_size must be positive");
  if (levels.empty()) throw ConfigError("encoder needs at least one level");
  for (const auto& l : levels) {
    if (l.centroids == 0) throw ConfigError("set abstraction needs at least one centroid");
    if (l.radii.empty() || l.radii.size() != l.mlps.size()) {
      throw ConfigError("each radius needs exactly one channel list");
    }
    for (std::size_t i = 0; i < l.radii.size(); ++i) {
      if (!(l.radii[i] > 0.0)) throw ConfigError("radii must be positive");
      if (i > 0 && !(l.radii[i] > l.radii[i - 1])) {
        throw ConfigError("radii must be strictly increasing");
      }
      if (l.mlps[i].empty()) throw ConfigError("channel lists must be non-empty");
      for (int ch : l.mlps[i]) {
        if (ch <= 0) throw ConfigError("channel counts must be positive");
      }
    }
  }
  if (global_mlp.empty()) throw ConfigError("global MLP must be non-empty");
  if (sparsity_dim <= 0) throw ConfigError("sparsity_dim must be positive");
}

int EncoderConfig::level_channels(std::size_t i) const {
  if (i == 0) return input_features;
  int c = 0;
  for (const auto& m : levels[i - 1].mlps) c += m.back();
  return c;
}

int EncoderConfig::output_dim() const { return global_mlp.back() + sparsity_dim; }

EncoderWeights EncoderWeights::random(const EncoderConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  EncoderWeights w;
  for (std::size_t l = 0; l < config.levels.size(); ++l) {
    SetAbstractionWeights sa;
    for (const auto& channels : config.levels[l].mlps) {
      sa.scales.push_back(random_mlp(3 + config.level_channels(l), channels, rng));
    }
    w.levels.push_back(std::move(sa));
  }
  w.global = random_mlp(3 + config.level_channels(config.levels.size()), config.global_mlp, rng);
  w.sparsity_table.resize(render::kNumSparsityBins, config.sparsity_dim);
  for (Eigen::Index i = 0; i < w.sparsity_table.size(); ++i) {
    w.sparsity_table.data()[i] = static_cast<float>(rng.normal());
  }
  return w;
}

EncoderWeights EncoderWeights::from_tensors(const EncoderConfig& config, const TensorMap& tensors) {
  config.validate();
  EncoderWeights w;
  for (std::size_t l = 0; l < config.levels.size(); ++l) {
    SetAbstractionWeights sa;
    for (std::size_t s = 0; s < config.levels[l].mlps.size(); ++s) {
      sa.scales.push_back(get_mlp(tensors, "sa" + std::to_string(l + 1) + ".scale" + std::to_string(s),
                                  3 + config.level_channels(l), config.levels[l].mlps[s]));
    }
    w.levels.push_back(std::move(sa));
  }
  w.global = get_mlp(tensors, "global", 3 + config.level_channels(config.levels.size()),
                     config.global_mlp);
  w.sparsity_table = from_tensor(require_tensor(
      tensors, "sparsity",
      {static_cast<uint64_t>(render::kNumSparsityBins), static_cast<uint64_t>(config.sparsity_dim)}));
  return w;
}

TensorMap EncoderWeights::to_tensors() const {
  TensorMap out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (std::size_t s = 0; s < levels[l].scales.size(); ++s) {
      put_mlp(out, "sa" + std::to_string(l + 1) + ".scale" + std::to_string(s), levels[l].scales[s]);
    }
  }
  put_mlp(out, "global", global);
  out["sparsity"] = to_tensor(sparsity_table);
  return out;
}

std::vector<uint32_t> farthest_point_sample(std::span<const Vec3f> positions, std::size_t k,
                                            std::size_t start_index) {
  const std::size_t n = positions.size();
  if (k == 0 || k > n) throw ConfigError("farthest_point_sample needs 1 <= k <= N");
  if (start_index >= n) throw ConfigError("farthest_point_sample start index out of range");
  std::vector<uint32_t> out;
  out.reserve(k);
  std::vector<double> dist(n, kInf);
  std::size_t cur = start_index;
  for (std::size_t it = 0; it < k; ++it) {
    out.push_back(static_cast<uint32_t>(cur));
    dist[cur] = -1.0;
    std::size_t next = n;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] < 0.0) continue;
      dist[i] = std::min(dist[i], sq_dist(positions[i], positions[cur]));
      if (dist[i] > best) {
        best = dist[i];
        next = i;
      }
    }
    if (next == n) break;
    cur = next;
  }
  return out;
}

std::size_t lexicographic_min_index(std::span<const Vec3f> positions) {
  if (positions.empty()) throw ConfigError("empty point set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < positions.size(); ++i) {
    const auto& a = positions[i];
    const auto& b = positions[best];
    if (std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3)) best = i;
  }
  return best;
}

std::vector<uint32_t> ball_query(std::span<const Vec3f> positions, const Vec3f& centroid,
                                 double radius, std::size_t max_k) {
  if (positions.empty()) throw DataError("ball_query on an empty cloud");
  if (!(radius > 0.0) || max_k == 0) throw ConfigError("ball_query needs radius > 0 and max_k >= 1");
  const double r2 = radius * radius;
  std::vector<std::pair<double, uint32_t>> inside;
  std::pair<double, uint32_t> nearest{kInf, 0};
  for (uint32_t i = 0; i < positions.size(); ++i) {
    const double d = sq_dist(positions[i], centroid);
    if (d <= r2) inside.emplace_back(d, i);
    if (d < nearest.first) nearest = {d, i};
  }
  if (inside.empty()) return {nearest.second};
  const std::size_t m = std::min(max_k, inside.size());
  std::partial_sort(inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(m), inside.end());
  std::vector<uint32_t> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = inside[i].second;
  return out;
}

Eigen::MatrixXf apply_mlp(const Mlp& mlp, const Eigen::MatrixXf& x) {
  Eigen::MatrixXf h = x;
  for (const Dense& d : mlp) {
    h = ((d.w * h).colwise() + d.b).cwiseMax(0.0f);
  }
  return h;
}

LevelCloud set_abstraction(const LevelCloud& level, const SetAbstractionConfig& config,
                           const SetAbstractionWeights& weights, std::size_t group_size) {
  const std::size_t n = level.size();
  if (n == 0) throw DataError("set_abstraction on an empty level");
  if (static_cast<std::size_t>(level.features.cols()) != n) {
    throw ConfigError("set_abstraction: feature columns do not match point count");
  }
  if (weights.scales.size() != config.radii.size()) {
    throw ConfigError("set_abstraction: one MLP per radius required");
  }
  const Eigen::Index d_in = level.features.rows();
  for (const Mlp& m : weights.scales) check_mlp(m, 3 + d_in, "set_abstraction");

  const std::size_t k = std::min(config.centroids, n);
  auto centers = farthest_point_sample(level.positions, k, lexicographic_min_index(level.positions));
  centers.reserve(config.centroids);
  for (std::size_t i = k; i < config.centroids; ++i) centers.push_back(centers[i % k]);

  Eigen::Index out_dim = 0;
  for (const Mlp& m : weights.scales) out_dim += m.back().w.rows();

  LevelCloud out;
  out.level = static_cast<uint8_t>(level.level + 1);
  out.positions.reserve(centers.size());
  out.features.resize(out_dim, static_cast<Eigen::Index>(centers.size()));
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const Vec3f& ctr = level.positions[centers[c]];
    out.positions.push_back(ctr);
    Eigen::Index row = 0;
    for (std::size_t s = 0; s < config.radii.size(); ++s) {
      const auto group = ball_query(level.positions, ctr, config.radii[s], group_size);
      Eigen::MatrixXf x(3 + d_in, static_cast<Eigen::Index>(group.size()));
      for (std::size_t j = 0; j < group.size(); ++j) {
        x.block<3, 1>(0, j) = level.positions[group[j]] - ctr;
        x.block(3, j, d_in, 1) = level.features.col(group[j]);
      }
      const Eigen::MatrixXf h = apply_mlp(weights.scales[s], x);
      out.features.block(row, c, h.rows(), 1) = h.rowwise().maxCoeff();
      row += h.rows();
    }
  }
  return out;
}

Eigen::VectorXf global_abstraction(const LevelCloud& level, const Mlp& mlp) {
  const std::size_t n = level.size();
  if (n == 0) throw DataError("global_abstraction on an empty level");
  if (static_cast<std::size_t>(level.features.cols()) != n) {
    throw ConfigError("global_abstraction: feature columns do not match point count");
  }
  const Eigen::Index d_in = level.features.rows();
  check_mlp(mlp, 3 + d_in, "global_abstraction");
  Eigen::MatrixXf x(3 + d_in, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    x.block<3, 1>(0, j) = level.positions[j];
    x.block(3, j, d_in, 1) = level.features.col(j);
  }
  return apply_mlp(mlp, x).rowwise().maxCoeff();
}

Eigen::MatrixXf feature_propagate(const LevelCloud& coarse, const LevelCloud& fine, bool use_skip,
                                  const Mlp& mlp) {
  if (coarse.size() == 0) throw DataError("feature_propagate needs a non-empty coarse level");
  if (static_cast<std::size_t>(coarse.features.cols()) != coarse.size() ||
      (use_skip && static_cast<std::size_t>(fine.features.cols()) != fine.size())) {
    throw ConfigError("feature_propagate: feature columns do not match point count");
  }
  const Eigen::Index dc = coarse.features.rows();
  const Eigen::Index ds = use_skip ? fine.features.rows() : 0;
  check_mlp(mlp, dc + ds, "feature_propagate");

  const std::size_t nn = std::min<std::size_t>(3, coarse.size());
  Eigen::MatrixXf x(dc + ds, static_cast<Eigen::Index>(fine.size()));
  std::vector<std::pair<double, uint32_t>> d(coarse.size());
  for (std::size_t i = 0; i < fine.size(); ++i) {
    for (uint32_t j = 0; j < coarse.size(); ++j) {
      d[j] = {std::sqrt(sq_dist(fine.positions[i], coarse.positions[j])), j};
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(nn), d.end());
    Eigen::VectorXf interp;
    if (d[0].first < 1e-8) {
      interp = coarse.features.col(d[0].second);
    } else {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(dc);
      double wsum = 0.0;
      for (std::size_t k = 0; k < nn; ++k) {
        const double w = 1.0 / d[k].first;
        acc += w * coarse.features.col(d[k].second).cast<double>();
        wsum += w;
      }
      interp = (acc / wsum).cast<float>();
    }
    x.block(0, i, dc, 1) = interp;
    if (use_skip) x.block(dc, i, ds, 1) = fine.features.col(i);
  }
  return apply_mlp(mlp, x);
}

LevelCloud input_level(const render::Observation& obs) {
  LevelCloud l;
  l.positions = obs.camera_points;
  l.features.resize(3, static_cast<Eigen::Index>(obs.cloud.size()));
  for (std::size_t i = 0; i < obs.cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) l.features(c, i) = obs.cloud.colors[i][c] / 255.0f;
  }
  return l;
}

Eigen::VectorXf encode_observation(const render::Observation& obs, const EncoderConfig& config,
                                   const EncoderWeights& weights) {
  config.validate();
  if (obs.cloud.empty()) throw DataError("cannot encode an empty observation");
  if (obs.camera_points.size() != obs.cloud.size()) {
    throw DataError("observation camera points do not match its cloud");
  }
  if (weights.levels.size() != config.levels.size()) {
    throw ConfigError("encoder weights do not match the configuration");
  }
  LevelCloud level = input_level(obs);
  for (std::size_t l = 0; l < config.levels.size(); ++l) {
    level = set_abstraction(level, config.levels[l], weights.levels[l], config.group_size);
  }
  const Eigen::VectorXf summary = global_abstraction(level, weights.global);
  const uint8_t bin = render::sparsity_bin(static_cast<uint32_t>(obs.cloud.size()));
  if (weights.sparsity_table.rows() != render::kNumSparsityBins ||
      weights.sparsity_table.cols() != config.sparsity_dim) {
    throw ConfigError("sparsity table shape mismatch");
  }
  Eigen::VectorXf out(summary.size() + config.sparsity_dim);
  out << summary, weights.sparsity_table.row(bin).transpose();
  return out;
}

}  // namespace eqa::pointnet
