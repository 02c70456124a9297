#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <vector>

#include "erach/random.hpp"

namespace erach {

// Fully-connected network with ReLU hidden layers and an identity output,
// dims = [input, hidden..., output]. Everything is 64-bit and deterministic.
struct MlpParams {
  std::vector<int> dims;
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;

  int input_size() const { return dims.front(); }
  int output_size() const { return dims.back(); }
  long parameter_count() const;
  bool all_finite() const;
};

MlpParams zero_mlp(std::vector<int> dims);
// He-style uniform init U(+-sqrt(6/fan_in)) on weights, zero biases. The
// output layer is scaled by `output_scale`; policy/value heads use a small
// scale so initial policies start near uniform.
MlpParams he_uniform_mlp(std::vector<int> dims, Rng& rng,
                         double output_scale = 1.0);

// Post-activation values per layer; act[0] is the input. For ReLU layers the
// sign of the stored activation recovers the backward mask.
struct ForwardCache {
  std::vector<Eigen::VectorXd> act;
};

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x,
                            ForwardCache* cache = nullptr);

// Per-parameter partials, same shapes as MlpParams.
struct GradientSet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  void set_zero();
  bool all_finite() const;
};

GradientSet make_gradients(const MlpParams& params);

// Accumulates exact reverse-mode gradients of dL/dy into `accum`.
void mlp_backward(const MlpParams& params, const ForwardCache& cache,
                  const Eigen::VectorXd& output_gradient, GradientSet& accum);

// Numerically stable softmax head with entropy.
struct PolicyHead {
  Eigen::VectorXd probs;
  Eigen::VectorXd log_probs;
  double entropy = 0.0;
};

PolicyHead policy_head(const Eigen::VectorXd& logits);

// Inverse-CDF sample from the head's probabilities.
int sample_action(const PolicyHead& head, Rng& rng);
int greedy_action(const PolicyHead& head);

struct RmsPropConfig {
  double learning_rate = 1e-4;
  double decay = 0.99;
  double epsilon = 1e-8;
};

// acc <- decay*acc + (1-decay)*g^2;  p <- p - lr * g / (sqrt(acc) + eps)
class RmsProp {
 public:
  explicit RmsProp(const MlpParams& params, RmsPropConfig cfg = {});
  void step(MlpParams& params, const GradientSet& grads);
  const RmsPropConfig& config() const { return cfg_; }

 private:
  RmsPropConfig cfg_;
  GradientSet acc_;
};

// Versioned little-endian checkpoint; doubles round-trip bit-exactly.
void save_mlp(std::ostream& out, const MlpParams& params);
MlpParams load_mlp(std::istream& in);

}  // namespace erach
