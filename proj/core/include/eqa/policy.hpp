#pragma once

#include "eqa/agent.hpp"
#include "eqa/tensor_io.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eqa::imitation {

enum class PolicyKind : uint8_t { Reactive, Memory };

std::string_view name(PolicyKind k);
PolicyKind parse_policy_kind(std::string_view s);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Memory;
  int feature_dim = 22;
  int hidden = 64;  // memory: recurrent state size
  int layers = 1;   // memory: stacked gated layers
  int window = 5;   // reactive: number of most recent frames

  void validate() const;
};

struct ParamBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;
};

// One training sequence: features D x T, expert actions and loss weights.
struct Sequence {
  Eigen::MatrixXd features;
  std::vector<Action> actions;
  std::vector<double> weights;
};

// Action predictor with all parameters in one flat vector.
//   reactive: logits = W [x_t, x_{t-1}, ..., x_{t-window+1}] + b (zero padded)
//   memory:   per layer z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
//             n = tanh(Wn x + r * (Un h) + bn), h' = (1 - z) n + z h;
//             logits = V h_top + c
class Policy {
 public:
  Policy() = default;
  explicit Policy(const PolicyConfig& config);  // all parameters zero
  static Policy random(const PolicyConfig& config, uint64_t seed);

  const PolicyConfig& config() const { return config_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  const std::vector<ParamBlock>& layout() const { return layout_; }
  Eigen::Map<Eigen::MatrixXd> block(const std::string& name);
  Eigen::Map<const Eigen::MatrixXd> block(const std::string& name) const;

  // Logits (kNumActions x T) for a feature sequence (D x T).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& features) const;

  struct State {
    std::vector<Eigen::VectorXd> hidden;  // memory
    std::vector<Eigen::VectorXd> frames;  // reactive, most recent first
  };
  State initial_state() const;
  // Logits for one step; identical to the matching column of forward().
  Eigen::VectorXd step(State& state, const Eigen::VectorXd& x) const;

  // Inflection-weighted loss of one sequence; adds d loss / d params to *grad
  // when non-null.
  double loss_and_gradient(const Sequence& seq, Eigen::VectorXd* grad) const;

  TensorMap to_tensors() const;
  static Policy from_tensors(const TensorMap& tensors);

 private:
  void build_layout();
  const ParamBlock& find(const std::string& name) const;
  Eigen::Map<const Eigen::MatrixXd> cblock(const std::string& name) const;

  PolicyConfig config_;
  std::vector<ParamBlock> layout_;
  Eigen::VectorXd params_;
};

// Mean over sequences of the per-sequence weighted loss, and its gradient.
double batch_loss_and_gradient(const Policy& policy, std::span<const Sequence* const> batch,
                               Eigen::VectorXd* grad);

}  // namespace eqa::imitation
