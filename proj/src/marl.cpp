#include "erach/marl.hpp"

#include <cmath>

namespace erach {

int encoded_size(const EncodingConfig& cfg) {
  int n = 0;
  if (cfg.mask.time) n += 1;
  if (cfg.mask.positions) n += 3 * cfg.planes;
  if (cfg.mask.throughput) n += 1;
  if (cfg.mask.collision) n += 1;
  if (cfg.mask.prev_action) n += cfg.planes + 1;
  if (cfg.coop) n += 2;
  return n;
}

namespace {

void encode_local(const AgentObservation& obs, const EncodingConfig& cfg,
                  Eigen::VectorXd& x, int& at) {
  if (cfg.mask.time) {
    x(at++) = static_cast<double>(obs.slot) /
              static_cast<double>(obs.episode_length);
  }
  if (cfg.mask.positions) {
    if (static_cast<int>(obs.nearest_sat_pos.size()) != cfg.planes) {
      throw std::invalid_argument("encode: observation plane count mismatch");
    }
    for (const auto& p : obs.nearest_sat_pos) {
      x(at++) = p.x() / cfg.orbit_circumference_m;
      x(at++) = p.y() / cfg.orbit_circumference_m;
      x(at++) = p.z() / cfg.orbit_circumference_m;
    }
  }
  if (cfg.mask.throughput) {
    x(at++) = obs.prev_throughput_bits / cfg.throughput_scale_bits;
  }
  if (cfg.mask.collision) {
    x(at++) = obs.prev_collision ? 1.0 : 0.0;
  }
  if (cfg.mask.prev_action) {
    for (int a = 0; a <= cfg.planes; ++a) {
      x(at++) = obs.prev_action == a ? 1.0 : 0.0;
    }
  }
}

}  // namespace

Eigen::VectorXd encode_observation(const AgentObservation& obs,
                                   const EncodingConfig& cfg) {
  Eigen::VectorXd x(encoded_size(cfg));
  int at = 0;
  encode_local(obs, cfg, x, at);
  if (cfg.coop) {
    x(at++) = 0.0;
    x(at++) = 0.0;
  }
  return x;
}

Eigen::VectorXd encode_observation(const CoopObservation& obs,
                                   const EncodingConfig& cfg) {
  Eigen::VectorXd x(encoded_size(cfg));
  int at = 0;
  encode_local(obs.local, cfg, x, at);
  if (cfg.coop) {
    x(at++) = obs.total_throughput_bits / cfg.throughput_scale_bits;
    x(at++) = static_cast<double>(obs.total_collisions) /
              static_cast<double>(cfg.ut_count);
  }
  return x;
}

void RewardConfig::validate() const {
  if (scale_bits <= 0) throw std::invalid_argument("reward: scale_bits must be > 0");
  if (rho < 0) throw std::invalid_argument("reward: rho must be >= 0");
}

double reward(double throughput_bits, bool collided, const RewardConfig& cfg) {
  switch (cfg.mode) {
    case RewardMode::standard: {
      const double penalty = collided ? cfg.rho * cfg.scale_bits : 0.0;
      return (throughput_bits - penalty - cfg.mean_bits) / cfg.scale_bits;
    }
    case RewardMode::rate_max:
    case RewardMode::coop:
      return (throughput_bits - cfg.mean_bits) / cfg.scale_bits;
  }
  return 0.0;
}

double advantage(double reward_next, double value_now, double value_next,
                 double gamma, bool terminal) {
  return reward_next + gamma * value_next * (terminal ? 0.0 : 1.0) - value_now;
}

void TrainingConfig::validate() const {
  if (gamma <= 0 || gamma > 1) throw std::invalid_argument("training: gamma must be in (0, 1]");
  if (entropy_coef < 0 || value_coef < 0) {
    throw std::invalid_argument("training: loss coefficients must be >= 0");
  }
  if (episodes < 1) throw std::invalid_argument("training: episodes must be >= 1");
  if (steps_per_episode < 1) throw std::invalid_argument("training: steps_per_episode must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("training: eval_episodes must be >= 1");
}

EpisodeLossInfo accumulate_episode_gradients(
    const MlpParams& actor, const MlpParams& critic,
    std::span<const TrajectoryStep> trajectory, double gamma,
    double entropy_coef, double value_coef, GradientSet& actor_grads,
    GradientSet& critic_grads) {
  if (trajectory.empty()) {
    throw std::invalid_argument("accumulate_episode_gradients: empty trajectory");
  }

  EpisodeLossInfo info;
  ForwardCache actor_cache;
  ForwardCache critic_cache;

  double ret = 0.0;  // R = 0 for the terminal state
  for (size_t i = trajectory.size(); i-- > 0;) {
    const auto& step = trajectory[i];
    ret = step.reward + gamma * ret;
    info.cumulative_reward += step.reward;

    const Eigen::VectorXd logits = mlp_forward(actor, step.features, &actor_cache);
    const PolicyHead head = policy_head(logits);
    const double value = mlp_forward(critic, step.features, &critic_cache)(0);
    const double kappa = ret - value;

    // Actor: d/dz of -kappa*log pi(a) - beta_e*H, advantage held constant.
    Eigen::VectorXd dlogits = kappa * head.probs;
    dlogits(step.action) -= kappa;
    dlogits.array() += entropy_coef * head.probs.array() *
                       (head.log_probs.array() + head.entropy);
    mlp_backward(actor, actor_cache, dlogits, actor_grads);

    // Critic: d/dV of 0.5*beta_c*kappa^2.
    Eigen::VectorXd dvalue(1);
    dvalue(0) = value_coef * (value - ret);
    mlp_backward(critic, critic_cache, dvalue, critic_grads);

    info.actor_loss += -kappa * head.log_probs(step.action) -
                       entropy_coef * head.entropy;
    info.critic_loss += 0.5 * value_coef * kappa * kappa;
    info.mean_entropy += head.entropy;
  }
  info.mean_entropy /= static_cast<double>(trajectory.size());
  return info;
}

TrainingDivergence::TrainingDivergence(int episode_, long step_,
                                       const std::string& what)
    : std::runtime_error(what), episode(episode_), step(step_) {}

ErachAgent ErachAgent::create(const EncodingConfig& enc, RmsPropConfig opt,
                              std::uint64_t init_seed,
                              std::uint64_t action_seed) {
  Rng init_rng(init_seed);
  const int in = encoded_size(enc);
  // Small-scale heads: the initial policy is near uniform and the initial
  // value near zero, so early dynamics are driven by experience rather than
  // by each agent's random initial attempt bias.
  MlpParams actor = he_uniform_mlp({in, 128, 128, enc.planes + 1}, init_rng, 0.01);
  MlpParams critic = he_uniform_mlp({in, 128, 128, 1}, init_rng, 0.01);
  RmsProp actor_opt(actor, opt);
  RmsProp critic_opt(critic, opt);
  return ErachAgent{std::move(actor), std::move(critic), std::move(actor_opt),
                    std::move(critic_opt), Rng(action_seed)};
}

TrainResult train(RaEnvironment& env, std::vector<ErachAgent>& agents,
                  const TrainingConfig& train_cfg,
                  const RewardConfig& reward_cfg,
                  const EncodingConfig& enc_cfg) {
  train_cfg.validate();
  reward_cfg.validate();
  const int n_agents = static_cast<int>(agents.size());
  if (n_agents != env.ut_count()) {
    throw std::invalid_argument("train: agent count must match UT count");
  }
  const bool coop = reward_cfg.mode == RewardMode::coop;
  if (coop != enc_cfg.coop) {
    throw std::invalid_argument("train: coop reward requires coop encoding");
  }

  TrainResult result;
  result.episodes.reserve(static_cast<size_t>(train_cfg.episodes));

  std::vector<std::vector<TrajectoryStep>> trajectories(
      static_cast<size_t>(n_agents));
  for (auto& t : trajectories) t.reserve(static_cast<size_t>(env.episode_length()));
  std::vector<RaAction> actions(static_cast<size_t>(n_agents));
  std::vector<GradientSet> actor_grads;
  std::vector<GradientSet> critic_grads;
  for (const auto& a : agents) {
    actor_grads.push_back(make_gradients(a.actor));
    critic_grads.push_back(make_gradients(a.critic));
  }

  for (int episode = 0; episode < train_cfg.episodes; ++episode) {
    env.reset();
    for (auto& t : trajectories) t.clear();
    MetricsAccumulator acc(n_agents);

    while (!env.done()) {
      const long slot = env.slot();
      for (int j = 0; j < n_agents; ++j) {
        auto& agent = agents[static_cast<size_t>(j)];
        Eigen::VectorXd x = coop
            ? encode_observation(env.observe_coop(j), enc_cfg)
            : encode_observation(env.observe(j), enc_cfg);
        const Eigen::VectorXd logits = mlp_forward(agent.actor, x);
        if (!logits.allFinite()) {
          throw TrainingDivergence(episode, slot, "non-finite policy logits");
        }
        const PolicyHead head = policy_head(logits);
        const int a = sample_action(head, agent.rng);
        if (a == kBackoff) {
          actions[static_cast<size_t>(j)] = {kBackoff, kNoPreamble};
        } else {
          std::uniform_int_distribution<int> preamble(1, env.preambles());
          actions[static_cast<size_t>(j)] = {a, preamble(agent.rng)};
        }
        trajectories[static_cast<size_t>(j)].push_back(
            {std::move(x), a, 0.0});
      }

      const SlotOutcome& outcome = env.step(actions);
      acc.add(outcome);

      double total_bits = 0.0;
      if (coop) {
        for (const auto& u : outcome.ut) total_bits += u.throughput_bits;
      }
      for (int j = 0; j < n_agents; ++j) {
        const auto& u = outcome.ut[static_cast<size_t>(j)];
        trajectories[static_cast<size_t>(j)].back().reward =
            coop ? reward(total_bits, false, reward_cfg)
                 : reward(u.throughput_bits, u.collided, reward_cfg);
      }
    }

    TrainEpisodeRow row;
    row.episode = episode;
    for (int j = 0; j < n_agents; ++j) {
      auto& agent = agents[static_cast<size_t>(j)];
      auto& ag = actor_grads[static_cast<size_t>(j)];
      auto& cg = critic_grads[static_cast<size_t>(j)];
      ag.set_zero();
      cg.set_zero();
      const EpisodeLossInfo info = accumulate_episode_gradients(
          agent.actor, agent.critic, trajectories[static_cast<size_t>(j)],
          train_cfg.gamma, train_cfg.entropy_coef, train_cfg.value_coef, ag,
          cg);
      if (!std::isfinite(info.actor_loss) || !std::isfinite(info.critic_loss) ||
          !ag.all_finite() || !cg.all_finite()) {
        throw TrainingDivergence(episode, -1, "non-finite loss gradient");
      }
      agent.actor_opt.step(agent.actor, ag);
      agent.critic_opt.step(agent.critic, cg);
      if (!agent.actor.all_finite() || !agent.critic.all_finite()) {
        throw TrainingDivergence(episode, -1, "non-finite parameters after update");
      }
      row.cumulative_reward.push_back(info.cumulative_reward);
      row.actor_loss.push_back(info.actor_loss);
      row.critic_loss.push_back(info.critic_loss);
      row.entropy.push_back(info.mean_entropy);
    }
    row.metrics = acc.finalize(env.config().timing, env.planes(), env.preambles());
    result.episodes.push_back(std::move(row));
  }
  return result;
}

ErachPolicy::ErachPolicy(const MlpParams& actor, EncodingConfig enc,
                         int preambles, bool greedy)
    : actor_(&actor), enc_(std::move(enc)), preambles_(preambles), greedy_(greedy) {}

RaAction ErachPolicy::act_on_features(const Eigen::VectorXd& x, Rng& rng) {
  const PolicyHead head = policy_head(mlp_forward(*actor_, x));
  const int a = greedy_ ? greedy_action(head) : sample_action(head, rng);
  if (a == kBackoff) return {kBackoff, kNoPreamble};
  std::uniform_int_distribution<int> preamble(1, preambles_);
  return {a, preamble(rng)};
}

RaAction ErachPolicy::act(const AgentObservation& obs, Rng& rng) {
  return act_on_features(encode_observation(obs, enc_), rng);
}

CoopErachPolicy::CoopErachPolicy(const MlpParams& actor, EncodingConfig enc,
                                 int preambles, bool greedy)
    : ErachPolicy(actor, enc, preambles, greedy), enc_(std::move(enc)) {}

RaAction CoopErachPolicy::act(const AgentObservation&, Rng&) {
  throw std::logic_error("cooperative policy needs the cheap-talk observation");
}

RaAction CoopErachPolicy::act_coop(const CoopObservation& obs, Rng& rng) {
  return act_on_features(encode_observation(obs, enc_), rng);
}

EvaluationResult evaluate(RaEnvironment& env,
                          std::span<const std::unique_ptr<Policy>> policies,
                          int episodes, std::span<Rng> agent_rngs, bool coop) {
  const int n = env.ut_count();
  if (static_cast<int>(policies.size()) != n ||
      static_cast<int>(agent_rngs.size()) != n) {
    throw std::invalid_argument("evaluate: policy/rng count mismatch");
  }

  EvaluationResult result;
  MetricsAccumulator pooled(n);
  std::vector<RaAction> actions(static_cast<size_t>(n));
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    for (int j = 0; j < n; ++j) {
      policies[static_cast<size_t>(j)]->reset(agent_rngs[static_cast<size_t>(j)]);
    }
    MetricsAccumulator acc(n);
    while (!env.done()) {
      if (coop) {
        for (int j = 0; j < n; ++j) {
          actions[static_cast<size_t>(j)] =
              policies[static_cast<size_t>(j)]->act_coop(
                  env.observe_coop(j), agent_rngs[static_cast<size_t>(j)]);
        }
      } else {
        for (int j = 0; j < n; ++j) {
          actions[static_cast<size_t>(j)] = policies[static_cast<size_t>(j)]->act(
              env.observe(j), agent_rngs[static_cast<size_t>(j)]);
        }
      }
      const SlotOutcome& outcome = env.step(actions);
      acc.add(outcome);
      pooled.add(outcome);
      for (int j = 0; j < n; ++j) {
        policies[static_cast<size_t>(j)]->notify(
            outcome.ut[static_cast<size_t>(j)], agent_rngs[static_cast<size_t>(j)]);
      }
    }
    result.episodes.push_back(
        acc.finalize(env.config().timing, env.planes(), env.preambles()));
  }
  result.pooled = pooled.finalize(env.config().timing, env.planes(), env.preambles());
  return result;
}

}  // namespace erach
