#include "eqa/policy.hpp"

#include "eqa/error.hpp"
#include "eqa/imitation.hpp"
#include "eqa/rng.hpp"

#include <cmath>

namespace eqa::imitation {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd sigmoid(const VectorXd& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }

std::string layer_name(int l, const char* what) { return "l" + std::to_string(l) + "." + what; }

}  // namespace

std::string_view name(PolicyKind k) { return k == PolicyKind::Reactive ? "reactive" : "memory"; }

PolicyKind parse_policy_kind(std::string_view s) {
  if (s == "reactive") return PolicyKind::Reactive;
  if (s == "memory") return PolicyKind::Memory;
  throw ConfigError("unknown policy kind " + std::string(s));
}

void PolicyConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (kind == PolicyKind::Memory && (hidden < 1 || layers < 1)) {
    throw ConfigError("memory policy needs hidden >= 1 and layers >= 1");
  }
  if (kind == PolicyKind::Reactive && window < 1) throw ConfigError("window must be >= 1");
}

Policy::Policy(const PolicyConfig& config) : config_(config) {
  config_.validate();
  build_layout();
}

void Policy::build_layout() {
  layout_.clear();
  Eigen::Index off = 0;
  auto add = [&](std::string n, Eigen::Index r, Eigen::Index c) {
    layout_.push_back({std::move(n), r, c, off});
    off += r * c;
  };
  const int d = config_.feature_dim;
  if (config_.kind == PolicyKind::Reactive) {
    add("W", kNumActions, static_cast<Eigen::Index>(config_.window) * d);
    add("b", kNumActions, 1);
  } else {
    const int h = config_.hidden;
    for (int l = 0; l < config_.layers; ++l) {
      const int in = l == 0 ? d : h;
      for (const char* g : {"Wz", "Wr", "Wn"}) add(layer_name(l, g), h, in);
      for (const char* g : {"Uz", "Ur", "Un"}) add(layer_name(l, g), h, h);
      for (const char* g : {"bz", "br", "bn"}) add(layer_name(l, g), h, 1);
    }
    add("V", kNumActions, h);
    add("c", kNumActions, 1);
  }
  params_ = VectorXd::Zero(off);
}

Policy Policy::random(const PolicyConfig& config, uint64_t seed) {
  Policy p(config);
  Rng rng(seed);
  for (const auto& b : p.layout_) {
    if (b.cols == 1) continue;  // biases start at zero
    const double s = 1.0 / std::sqrt(static_cast<double>(b.cols));
    for (Eigen::Index i = 0; i < b.rows * b.cols; ++i) p.params_[b.offset + i] = rng.uniform(-s, s);
  }
  return p;
}

const ParamBlock& Policy::find(const std::string& n) const {
  for (const auto& b : layout_) {
    if (b.name == n) return b;
  }
  throw ConfigError("policy has no parameter block " + n);
}

Eigen::Map<Eigen::MatrixXd> Policy::block(const std::string& n) {
  const auto& b = find(n);
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::MatrixXd> Policy::block(const std::string& n) const { return cblock(n); }

Eigen::Map<const Eigen::MatrixXd> Policy::cblock(const std::string& n) const {
  const auto& b = find(n);
  return {params_.data() + b.offset, b.rows, b.cols};
}

Policy::State Policy::initial_state() const {
  State s;
  if (config_.kind == PolicyKind::Memory) {
    s.hidden.assign(static_cast<std::size_t>(config_.layers), VectorXd::Zero(config_.hidden));
  } else {
    s.frames.assign(static_cast<std::size_t>(config_.window), VectorXd::Zero(config_.feature_dim));
  }
  return s;
}

VectorXd Policy::step(State& s, const VectorXd& x) const {
  if (x.size() != config_.feature_dim) throw ConfigError("policy input dimension mismatch");
  if (config_.kind == PolicyKind::Reactive) {
    s.frames.insert(s.frames.begin(), x);
    s.frames.pop_back();
    const int d = config_.feature_dim;
    VectorXd win(static_cast<Eigen::Index>(config_.window) * d);
    for (int k = 0; k < config_.window; ++k) win.segment(k * d, d) = s.frames[k];
    return cblock("W") * win + cblock("b");
  }
  VectorXd in = x;
  for (int l = 0; l < config_.layers; ++l) {
    const VectorXd& h = s.hidden[l];
    const VectorXd z = sigmoid(cblock(layer_name(l, "Wz")) * in + cblock(layer_name(l, "Uz")) * h +
                               cblock(layer_name(l, "bz")));
    const VectorXd r = sigmoid(cblock(layer_name(l, "Wr")) * in + cblock(layer_name(l, "Ur")) * h +
                               cblock(layer_name(l, "br")));
    const VectorXd n = (cblock(layer_name(l, "Wn")) * in +
                        r.cwiseProduct(cblock(layer_name(l, "Un")) * h) + cblock(layer_name(l, "bn")))
                           .array()
                           .tanh()
                           .matrix();
    s.hidden[l] = (VectorXd::Ones(z.size()) - z).cwiseProduct(n) + z.cwiseProduct(h);
    in = s.hidden[l];
  }
  return cblock("V") * in + cblock("c");
}

MatrixXd Policy::forward(const MatrixXd& features) const {
  if (features.rows() != config_.feature_dim) throw ConfigError("policy input dimension mismatch");
  State s = initial_state();
  MatrixXd out(kNumActions, features.cols());
  for (Eigen::Index t = 0; t < features.cols(); ++t) out.col(t) = step(s, features.col(t));
  return out;
}

double Policy::loss_and_gradient(const Sequence& seq, VectorXd* grad) const {
  const MatrixXd& X = seq.features;
  if (X.rows() != config_.feature_dim) throw ConfigError("policy input dimension mismatch");
  const Eigen::Index T = X.cols();

  if (config_.kind == PolicyKind::Reactive) {
    const MatrixXd logits = forward(X);
    const double loss = iw_loss(logits, seq.actions, seq.weights).loss;
    if (!grad) return loss;
    const MatrixXd dl = iw_loss_gradient(logits, seq.actions, seq.weights);
    const int d = config_.feature_dim;
    const auto& bw = find("W");
    const auto& bb = find("b");
    Eigen::Map<MatrixXd> gW(grad->data() + bw.offset, bw.rows, bw.cols);
    Eigen::Map<MatrixXd> gb(grad->data() + bb.offset, bb.rows, bb.cols);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (int k = 0; k < config_.window && t - k >= 0; ++k) {
        gW.middleCols(k * d, d) += dl.col(t) * X.col(t - k).transpose();
      }
      gb += dl.col(t);
    }
    return loss;
  }

  // Memory policy: forward with caches, then backpropagation through time.
  const int L = config_.layers;
  const int H = config_.hidden;
  struct Cache {
    VectorXd in, h_prev, z, r, n, un_h;
  };
  std::vector<std::vector<Cache>> cache(static_cast<std::size_t>(T), std::vector<Cache>(L));
  std::vector<VectorXd> h(static_cast<std::size_t>(L), VectorXd::Zero(H));
  MatrixXd logits(kNumActions, T);
  MatrixXd top(H, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    VectorXd in = X.col(t);
    for (int l = 0; l < L; ++l) {
      Cache& c = cache[t][l];
      c.in = in;
      c.h_prev = h[l];
      c.z = sigmoid(cblock(layer_name(l, "Wz")) * in + cblock(layer_name(l, "Uz")) * c.h_prev +
                    cblock(layer_name(l, "bz")));
      c.r = sigmoid(cblock(layer_name(l, "Wr")) * in + cblock(layer_name(l, "Ur")) * c.h_prev +
                    cblock(layer_name(l, "br")));
      c.un_h = cblock(layer_name(l, "Un")) * c.h_prev;
      c.n = (cblock(layer_name(l, "Wn")) * in + c.r.cwiseProduct(c.un_h) + cblock(layer_name(l, "bn")))
                .array()
                .tanh()
                .matrix();
      h[l] = (VectorXd::Ones(H) - c.z).cwiseProduct(c.n) + c.z.cwiseProduct(c.h_prev);
      in = h[l];
    }
    top.col(t) = in;
    logits.col(t) = cblock("V") * in + cblock("c");
  }
  const double loss = iw_loss(logits, seq.actions, seq.weights).loss;
  if (!grad) return loss;

  const MatrixXd dl = iw_loss_gradient(logits, seq.actions, seq.weights);
  auto gmap = [&](const std::string& n) {
    const auto& b = find(n);
    return Eigen::Map<MatrixXd>(grad->data() + b.offset, b.rows, b.cols);
  };
  gmap("V") += dl * top.transpose();
  gmap("c") += dl.rowwise().sum();

  std::vector<VectorXd> dh_next(static_cast<std::size_t>(L), VectorXd::Zero(H));
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    VectorXd dh_above = cblock("V").transpose() * dl.col(t);
    for (int l = L - 1; l >= 0; --l) {
      const Cache& c = cache[t][l];
      const VectorXd dh = dh_above + dh_next[l];
      const VectorXd dn = dh.cwiseProduct(VectorXd::Ones(H) - c.z);
      const VectorXd dz = dh.cwiseProduct(c.h_prev - c.n);
      VectorXd dh_prev = dh.cwiseProduct(c.z);

      const VectorXd dan = dn.array() * (1.0 - c.n.array().square());
      const VectorXd dr = dan.cwiseProduct(c.un_h);
      const VectorXd dun = dan.cwiseProduct(c.r);
      const VectorXd daz = dz.array() * c.z.array() * (1.0 - c.z.array());
      const VectorXd dar = dr.array() * c.r.array() * (1.0 - c.r.array());

      gmap(layer_name(l, "Wn")) += dan * c.in.transpose();
      gmap(layer_name(l, "bn")) += dan;
      gmap(layer_name(l, "Un")) += dun * c.h_prev.transpose();
      gmap(layer_name(l, "Wz")) += daz * c.in.transpose();
      gmap(layer_name(l, "Uz")) += daz * c.h_prev.transpose();
      gmap(layer_name(l, "bz")) += daz;
      gmap(layer_name(l, "Wr")) += dar * c.in.transpose();
      gmap(layer_name(l, "Ur")) += dar * c.h_prev.transpose();
      gmap(layer_name(l, "br")) += dar;

      dh_prev += cblock(layer_name(l, "Un")).transpose() * dun +
                 cblock(layer_name(l, "Uz")).transpose() * daz +
                 cblock(layer_name(l, "Ur")).transpose() * dar;
      dh_next[l] = dh_prev;
      if (l > 0) {
        dh_above = cblock(layer_name(l, "Wn")).transpose() * dan +
                   cblock(layer_name(l, "Wz")).transpose() * daz +
                   cblock(layer_name(l, "Wr")).transpose() * dar;
      }
    }
  }
  return loss;
}

TensorMap Policy::to_tensors() const {
  TensorMap out;
  Tensor cfg;
  cfg.shape = {5};
  cfg.data = {static_cast<float>(config_.kind), static_cast<float>(config_.feature_dim),
              static_cast<float>(config_.hidden), static_cast<float>(config_.layers),
              static_cast<float>(config_.window)};
  out["config"] = cfg;
  for (const auto& b : layout_) {
    Tensor t;
    t.shape = {static_cast<uint64_t>(b.rows), static_cast<uint64_t>(b.cols)};
    t.data.resize(static_cast<std::size_t>(b.rows * b.cols));
    // Row-major on disk.
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      for (Eigen::Index j = 0; j < b.cols; ++j) {
        t.data[static_cast<std::size_t>(i * b.cols + j)] =
            static_cast<float>(params_[b.offset + j * b.rows + i]);
      }
    }
    out[b.name] = std::move(t);
  }
  return out;
}

Policy Policy::from_tensors(const TensorMap& tensors) {
  const Tensor& cfg = require_tensor(tensors, "config", {5});
  PolicyConfig pc;
  pc.kind = cfg.data[0] == 0.0f ? PolicyKind::Reactive : PolicyKind::Memory;
  pc.feature_dim = static_cast<int>(cfg.data[1]);
  pc.hidden = static_cast<int>(cfg.data[2]);
  pc.layers = static_cast<int>(cfg.data[3]);
  pc.window = static_cast<int>(cfg.data[4]);
  Policy p(pc);
  for (const auto& b : p.layout_) {
    const Tensor& t =
        require_tensor(tensors, b.name, {static_cast<uint64_t>(b.rows), static_cast<uint64_t>(b.cols)});
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      for (Eigen::Index j = 0; j < b.cols; ++j) {
        p.params_[b.offset + j * b.rows + i] = t.data[static_cast<std::size_t>(i * b.cols + j)];
      }
    }
  }
  return p;
}

double batch_loss_and_gradient(const Policy& policy, std::span<const Sequence* const> batch,
                               Eigen::VectorXd* grad) {
  if (batch.empty()) throw ConfigError("empty training batch");
  if (grad) *grad = VectorXd::Zero(policy.params().size());
  double loss = 0.0;
  for (const Sequence* s : batch) loss += policy.loss_and_gradient(*s, grad);
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (grad) *grad *= inv;
  return loss * inv;
}

}  // namespace eqa::imitation
