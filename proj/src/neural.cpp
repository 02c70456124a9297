#include "erach/neural.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace erach {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
  for (size_t i = 0; i < dims.size(); ++i) {
    const int lower = i == 0 ? 0 : 1;  // a zero-width input is legal (bias-only net)
    if (dims[i] < lower) throw std::invalid_argument("mlp: invalid layer dimension");
  }
}

}  // namespace

long MlpParams::parameter_count() const {
  long n = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

bool MlpParams::all_finite() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

MlpParams zero_mlp(std::vector<int> dims) {
  check_dims(dims);
  MlpParams p;
  p.dims = std::move(dims);
  for (size_t l = 0; l + 1 < p.dims.size(); ++l) {
    p.weights.emplace_back(Eigen::MatrixXd::Zero(p.dims[l + 1], p.dims[l]));
    p.biases.emplace_back(Eigen::VectorXd::Zero(p.dims[l + 1]));
  }
  return p;
}

MlpParams he_uniform_mlp(std::vector<int> dims, Rng& rng, double output_scale) {
  MlpParams p = zero_mlp(std::move(dims));
  for (size_t l = 0; l < p.weights.size(); ++l) {
    const int fan_in = p.dims[l];
    double limit = fan_in > 0 ? std::sqrt(6.0 / fan_in) : 0.0;
    if (l + 1 == p.weights.size()) limit *= output_scale;
    std::uniform_real_distribution<double> uniform(-limit, limit);
    for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < p.weights[l].cols(); ++j) {
        p.weights[l](i, j) = uniform(rng);
      }
    }
  }
  return p;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x,
                            ForwardCache* cache) {
  if (x.size() != params.input_size()) {
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  }
  if (cache != nullptr) {
    cache->act.clear();
    cache->act.push_back(x);
  }
  Eigen::VectorXd a = x;
  const size_t last = params.weights.size() - 1;
  for (size_t l = 0; l < params.weights.size(); ++l) {
    Eigen::VectorXd z = params.weights[l] * a + params.biases[l];
    if (l != last) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache != nullptr) cache->act.push_back(a);
  }
  return a;
}

void GradientSet::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

bool GradientSet::all_finite() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

GradientSet make_gradients(const MlpParams& params) {
  GradientSet g;
  for (size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.emplace_back(Eigen::MatrixXd::Zero(params.weights[l].rows(),
                                                 params.weights[l].cols()));
    g.biases.emplace_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  return g;
}

void mlp_backward(const MlpParams& params, const ForwardCache& cache,
                  const Eigen::VectorXd& output_gradient, GradientSet& accum) {
  if (cache.act.size() != params.weights.size() + 1) {
    throw std::invalid_argument("mlp_backward: cache does not match network");
  }
  Eigen::VectorXd delta = output_gradient;
  for (size_t l = params.weights.size(); l-- > 0;) {
    accum.weights[l].noalias() += delta * cache.act[l].transpose();
    accum.biases[l] += delta;
    if (l > 0) {
      Eigen::VectorXd prev = params.weights[l].transpose() * delta;
      // ReLU mask from the stored post-activation of the previous layer.
      for (Eigen::Index i = 0; i < prev.size(); ++i) {
        if (cache.act[l](i) <= 0.0) prev(i) = 0.0;
      }
      delta = std::move(prev);
    }
  }
}

PolicyHead policy_head(const Eigen::VectorXd& logits) {
  PolicyHead head;
  const double max_logit = logits.maxCoeff();
  Eigen::VectorXd shifted = logits.array() - max_logit;
  const double lse = std::log(shifted.array().exp().sum());
  head.log_probs = shifted.array() - lse;
  head.probs = head.log_probs.array().exp();
  head.entropy = -(head.probs.array() * head.log_probs.array()).sum();
  return head;
}

int sample_action(const PolicyHead& head, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < head.probs.size(); ++i) {
    cum += head.probs(i);
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(head.probs.size() - 1);
}

int greedy_action(const PolicyHead& head) {
  Eigen::Index best = 0;
  head.probs.maxCoeff(&best);
  return static_cast<int>(best);
}

RmsProp::RmsProp(const MlpParams& params, RmsPropConfig cfg)
    : cfg_(cfg), acc_(make_gradients(params)) {}

void RmsProp::step(MlpParams& params, const GradientSet& grads) {
  for (size_t l = 0; l < params.weights.size(); ++l) {
    acc_.weights[l] = cfg_.decay * acc_.weights[l].array() +
                      (1.0 - cfg_.decay) * grads.weights[l].array().square();
    acc_.biases[l] = cfg_.decay * acc_.biases[l].array() +
                     (1.0 - cfg_.decay) * grads.biases[l].array().square();
    params.weights[l].array() -=
        cfg_.learning_rate * grads.weights[l].array() /
        (acc_.weights[l].array().sqrt() + cfg_.epsilon);
    params.biases[l].array() -=
        cfg_.learning_rate * grads.biases[l].array() /
        (acc_.biases[l].array().sqrt() + cfg_.epsilon);
  }
}

namespace {

constexpr std::uint32_t kMagic = 0x504c4d45;  // "EMLP"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("mlp checkpoint: truncated header");
  return v;
}

void write_doubles(std::ostream& out, const double* data, std::streamsize n) {
  out.write(reinterpret_cast<const char*>(data),
            n * static_cast<std::streamsize>(sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::streamsize n) {
  in.read(reinterpret_cast<char*>(data),
          n * static_cast<std::streamsize>(sizeof(double)));
  if (!in) throw std::runtime_error("mlp checkpoint: truncated payload");
}

}  // namespace

void save_mlp(std::ostream& out, const MlpParams& params) {
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(params.dims.size()));
  for (int d : params.dims) write_u32(out, static_cast<std::uint32_t>(d));
  for (size_t l = 0; l < params.weights.size(); ++l) {
    write_doubles(out, params.weights[l].data(), params.weights[l].size());
    write_doubles(out, params.biases[l].data(), params.biases[l].size());
  }
}

MlpParams load_mlp(std::istream& in) {
  if (read_u32(in) != kMagic) throw std::runtime_error("mlp checkpoint: bad magic");
  if (read_u32(in) != kVersion) throw std::runtime_error("mlp checkpoint: unsupported version");
  const std::uint32_t n_dims = read_u32(in);
  if (n_dims < 2 || n_dims > 64) throw std::runtime_error("mlp checkpoint: bad layer count");
  std::vector<int> dims(n_dims);
  for (auto& d : dims) d = static_cast<int>(read_u32(in));
  MlpParams p = zero_mlp(std::move(dims));
  for (size_t l = 0; l < p.weights.size(); ++l) {
    read_doubles(in, p.weights[l].data(), p.weights[l].size());
    read_doubles(in, p.biases[l].data(), p.biases[l].size());
  }
  return p;
}

}  // namespace erach
