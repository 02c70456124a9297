#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "erach/agents.hpp"
#include "erach/environment.hpp"
#include "erach/neural.hpp"
#include "erach/observation.hpp"

namespace erach {

// Which observation components enter the encoded state (drives the
// state-information ablation).
struct StateMask {
  bool time = true;
  bool positions = true;
  bool throughput = true;
  bool collision = true;
  bool prev_action = true;
};

struct EncodingConfig {
  StateMask mask;
  int planes = 2;
  long episode_length = 2604;
  double orbit_circumference_m = 4.3486e7;
  double throughput_scale_bits = 1.0;  // Sigma, also normalizes throughput inputs
  int ut_count = 5;                    // normalizes the coop collision count
  bool coop = false;
};

int encoded_size(const EncodingConfig& cfg);
Eigen::VectorXd encode_observation(const AgentObservation& obs,
                                   const EncodingConfig& cfg);
Eigen::VectorXd encode_observation(const CoopObservation& obs,
                                   const EncodingConfig& cfg);

enum class RewardMode { standard, coop, rate_max };

// g(Y) = (Y - mu) / Sigma, with the collision penalty expressed in units of
// Sigma so rho weighs a collision against one normalized throughput unit.
struct RewardConfig {
  double rho = 1.0;
  double mean_bits = 0.0;   // mu, bits per opportunity
  double scale_bits = 1.0;  // Sigma, bits per opportunity
  RewardMode mode = RewardMode::standard;
  void validate() const;
};

// standard: g(R_j - rho*c_j*Sigma); rate_max: g(R_j); coop mode expects the
// network-total bits in `throughput_bits` and ignores the collision flag.
double reward(double throughput_bits, bool collided, const RewardConfig& cfg);

// One-step TD advantage r + gamma*V(s') * (1 - terminal) - V(s).
double advantage(double reward_next, double value_now, double value_next,
                 double gamma, bool terminal);

struct TrainingConfig {
  double gamma = 1.0;          // un-discounted episode objective
  double entropy_coef = 0.01;  // beta_e
  double value_coef = 0.5;     // beta_c
  int episodes = 1000;         // E_max
  long steps_per_episode = 2604;
  RmsPropConfig optimizer;
  int eval_episodes = 20;
  bool greedy_eval = false;
  void validate() const;
};

struct TrajectoryStep {
  Eigen::VectorXd features;
  int action = 0;  // 0 = backoff, 1..K = plane
  double reward = 0.0;
};

struct EpisodeLossInfo {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_entropy = 0.0;
  double cumulative_reward = 0.0;
};

// Backward accumulation over a finished episode: returns are bootstrapped
// from the terminal step (R = 0), the critic gradient is beta_c*(V - R)*dV
// and the actor gradient is -(R - V)*dlog pi - beta_e*dH with the advantage
// held constant w.r.t. the actor parameters.
EpisodeLossInfo accumulate_episode_gradients(
    const MlpParams& actor, const MlpParams& critic,
    std::span<const TrajectoryStep> trajectory, double gamma,
    double entropy_coef, double value_coef, GradientSet& actor_grads,
    GradientSet& critic_grads);

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int episode, long step, const std::string& what);
  int episode;
  long step;
};

// One UT's actor/critic pair with its optimizer accumulators and stream.
struct ErachAgent {
  MlpParams actor;
  MlpParams critic;
  RmsProp actor_opt;
  RmsProp critic_opt;
  Rng rng;

  static ErachAgent create(const EncodingConfig& enc, RmsPropConfig opt,
                           std::uint64_t init_seed, std::uint64_t action_seed);
};

struct TrainEpisodeRow {
  int episode = 0;
  std::vector<double> cumulative_reward;  // per agent
  std::vector<double> actor_loss;
  std::vector<double> critic_loss;
  std::vector<double> entropy;
  EpisodeMetrics metrics;
};

struct TrainResult {
  std::vector<TrainEpisodeRow> episodes;
};

// Algorithm-1 training loop: one RMSprop update per agent per episode.
// Throws TrainingDivergence when a non-finite value reaches the parameters.
TrainResult train(RaEnvironment& env, std::vector<ErachAgent>& agents,
                  const TrainingConfig& train_cfg, const RewardConfig& reward_cfg,
                  const EncodingConfig& enc_cfg);

// Frozen-parameter policy wrappers used for evaluation.
class ErachPolicy : public Policy {
 public:
  ErachPolicy(const MlpParams& actor, EncodingConfig enc, int preambles,
              bool greedy);
  RaAction act(const AgentObservation& obs, Rng& rng) override;

 protected:
  RaAction act_on_features(const Eigen::VectorXd& x, Rng& rng);

 private:
  const MlpParams* actor_;
  EncodingConfig enc_;
  int preambles_;
  bool greedy_;
};

class CoopErachPolicy final : public ErachPolicy {
 public:
  CoopErachPolicy(const MlpParams& actor, EncodingConfig enc, int preambles,
                  bool greedy);
  RaAction act(const AgentObservation&, Rng&) override;
  RaAction act_coop(const CoopObservation& obs, Rng& rng) override;

 private:
  EncodingConfig enc_;
};

struct EvaluationResult {
  std::vector<EpisodeMetrics> episodes;
  EpisodeMetrics pooled;  // accumulated over all evaluation opportunities
};

// Rolls full episodes with frozen policies and aggregates the paper metrics.
EvaluationResult evaluate(RaEnvironment& env,
                          std::span<const std::unique_ptr<Policy>> policies,
                          int episodes, std::span<Rng> agent_rngs, bool coop);

}  // namespace erach
