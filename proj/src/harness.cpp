#include "erach/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

namespace erach {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

namespace {

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : "nan";
}

json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

// Mean pairwise distance between two uniform points in the unit square.
constexpr double kUnitSquareMeanDistance = 0.5214054331647207;

}  // namespace

std::vector<Eigen::Vector3d> place_uts(const ExperimentConfig& cfg, Rng& rng) {
  double side = cfg.area_side_m;
  if (cfg.ut_spacing_m) side = *cfg.ut_spacing_m / kUnitSquareMeanDistance;
  std::uniform_real_distribution<double> coord(-side / 2.0, side / 2.0);
  std::vector<Eigen::Vector3d> uts;
  uts.reserve(static_cast<size_t>(cfg.ut_count));
  for (int j = 0; j < cfg.ut_count; ++j) {
    const double x = coord(rng);
    const double y = coord(rng);
    uts.emplace_back(x, y, 0.0);
  }
  return uts;
}

namespace {

EnvironmentConfig environment_config(const ExperimentConfig& cfg) {
  EnvironmentConfig env;
  env.constellation = cfg.constellation;
  env.link = cfg.link;
  env.timing = cfg.timing;
  env.preambles = cfg.effective_preambles();
  env.episode_length = cfg.episode_length();
  env.per_subslot_fading = cfg.per_subslot_fading;
  return env;
}

EncodingConfig encoding_config(const ExperimentConfig& cfg) {
  EncodingConfig enc;
  enc.mask = cfg.state_mask;
  enc.planes = cfg.constellation.planes;
  enc.episode_length = cfg.episode_length();
  enc.orbit_circumference_m = cfg.constellation.circumference_m;
  enc.throughput_scale_bits = cfg.reward.scale_bits;
  enc.ut_count = cfg.ut_count;
  enc.coop = cfg.is_coop();
  return enc;
}

std::string serialize_agent(const ErachAgent& agent) {
  std::ostringstream out(std::ios::binary);
  save_mlp(out, agent.actor);
  save_mlp(out, agent.critic);
  return out.str();
}

}  // namespace

ReplicaResult run_replica(const ExperimentConfig& cfg, int replica) {
  ReplicaResult result;
  result.replica = replica;

  const auto r = static_cast<std::uint64_t>(replica);
  Rng placement_rng = derive_stream(cfg.seed, {stream_tag::placement, r});
  std::vector<Eigen::Vector3d> uts = place_uts(cfg, placement_rng);

  RaEnvironment env(environment_config(cfg), std::move(uts),
                    derive_seed(cfg.seed, {stream_tag::environment, r}),
                    derive_seed(cfg.seed, {stream_tag::position_noise, r}));

  std::vector<Rng> agent_rngs;
  for (int j = 0; j < cfg.ut_count; ++j) {
    agent_rngs.push_back(derive_stream(
        cfg.seed, {stream_tag::agent_actions, r, static_cast<std::uint64_t>(j)}));
  }

  std::vector<std::unique_ptr<Policy>> policies;
  const EncodingConfig enc = encoding_config(cfg);
  std::vector<ErachAgent> agents;

  if (cfg.is_learned()) {
    TrainingConfig train_cfg = cfg.training;
    train_cfg.steps_per_episode = cfg.episode_length();
    for (int j = 0; j < cfg.ut_count; ++j) {
      agents.push_back(ErachAgent::create(
          enc, train_cfg.optimizer,
          derive_seed(cfg.seed, {stream_tag::agent_init, r, static_cast<std::uint64_t>(j)}),
          derive_seed(cfg.seed, {stream_tag::agent_actions, r, static_cast<std::uint64_t>(j)})));
    }
    try {
      TrainResult trained = train(env, agents, train_cfg, cfg.reward, enc);
      result.training = std::move(trained.episodes);
    } catch (const TrainingDivergence& d) {
      result.diverged = true;
      result.divergence_episode = d.episode;
      result.divergence_detail = d.what();
      return result;
    }
    for (int j = 0; j < cfg.ut_count; ++j) {
      const auto& actor = agents[static_cast<size_t>(j)].actor;
      if (cfg.is_coop()) {
        policies.push_back(std::make_unique<CoopErachPolicy>(
            actor, enc, cfg.effective_preambles(), cfg.greedy_eval));
      } else {
        policies.push_back(std::make_unique<ErachPolicy>(
            actor, enc, cfg.effective_preambles(), cfg.greedy_eval));
      }
      // Evaluation continues each agent's own action stream.
      agent_rngs[static_cast<size_t>(j)] = agents[static_cast<size_t>(j)].rng;
    }
  } else if (cfg.protocol == "aloha") {
    for (int j = 0; j < cfg.ut_count; ++j) {
      policies.push_back(std::make_unique<AlohaPolicy>(cfg.constellation.planes));
    }
  } else {  // rach
    for (int j = 0; j < cfg.ut_count; ++j) {
      policies.push_back(std::make_unique<RachPolicy>(
          cfg.constellation.planes, cfg.effective_preambles(), cfg.backoff_window));
    }
  }

  EvaluationResult eval = evaluate(env, policies, cfg.eval_episodes, agent_rngs,
                                   cfg.is_coop());
  result.eval_episodes = std::move(eval.episodes);
  result.eval_pooled = std::move(eval.pooled);

  for (const auto& agent : agents) {
    result.checkpoints.push_back(serialize_agent(agent));
  }
  return result;
}

std::vector<ReplicaResult> run_replicas(const ExperimentConfig& cfg) {
  std::vector<std::future<ReplicaResult>> futures;
  futures.reserve(static_cast<size_t>(cfg.replicas));
  for (int r = 0; r < cfg.replicas; ++r) {
    futures.push_back(std::async(std::launch::async,
                                 [&cfg, r] { return run_replica(cfg, r); }));
  }
  std::vector<ReplicaResult> results;
  results.reserve(futures.size());
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

namespace {

AggregateStat aggregate(const std::vector<double>& values) {
  AggregateStat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.max_deviation = std::max(s.max_deviation, std::abs(v - s.mean));
  return s;
}

std::vector<double> collect(const std::vector<ReplicaResult>& replicas,
                            double (*pick)(const EpisodeMetrics&)) {
  std::vector<double> out;
  for (const auto& r : replicas) {
    if (!r.diverged) out.push_back(pick(r.eval_pooled));
  }
  return out;
}

void write_episode_csv_row(std::ostream& out, int replica, const char* phase,
                           int episode, const std::string& protocol,
                           const EpisodeMetrics& m) {
  out << replica << ',' << phase << ',' << episode << ',' << protocol << ','
      << format_double(m.network_throughput_bps) << ','
      << format_optional(m.collision_rate) << ','
      << format_optional(m.access_delay_s) << ','
      << format_optional(m.jains_index) << ','
      << format_double(m.resource_utilization) << '\n';
}

json metrics_to_json(const EpisodeMetrics& m) {
  return json{
      {"throughput_bps", m.network_throughput_bps},
      {"collision_rate", optional_to_json(m.collision_rate)},
      {"access_delay_s", optional_to_json(m.access_delay_s)},
      {"jain", optional_to_json(m.jains_index)},
      {"resource_util", m.resource_utilization},
      {"backoff_fraction", m.backoff_fraction},
      {"per_ut_throughput_bps", m.per_ut_throughput_bps},
      {"per_ut_backoff_fraction", m.per_ut_backoff_fraction},
  };
}

json aggregate_to_json(const AggregateStat& s) {
  return json{{"mean", s.mean}, {"max_deviation", s.max_deviation}};
}

}  // namespace

double trailing_mean_reward(const std::vector<TrainEpisodeRow>& rows, int window) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  const size_t n = rows.size();
  const size_t take = std::min<size_t>(static_cast<size_t>(window), n);
  double sum = 0.0;
  for (size_t i = n - take; i < n; ++i) {
    double agent_mean = 0.0;
    for (double c : rows[i].cumulative_reward) agent_mean += c;
    agent_mean /= static_cast<double>(rows[i].cumulative_reward.size());
    sum += agent_mean;
  }
  return sum / static_cast<double>(take);
}

int convergence_episode(const std::vector<TrainEpisodeRow>& rows, int window,
                        double tolerance) {
  if (rows.empty()) return 0;
  const double final_mean = trailing_mean_reward(rows, window);
  for (size_t e = 0; e < rows.size(); ++e) {
    std::vector<TrainEpisodeRow> upto(rows.begin(), rows.begin() + e + 1);
    const double trailing = trailing_mean_reward(upto, window);
    if (std::abs(trailing - final_mean) <= tolerance * std::abs(final_mean)) {
      return static_cast<int>(e) + 1;
    }
  }
  return static_cast<int>(rows.size());
}

RunRecord run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);

  RunRecord record;
  record.hash = config_hash(cfg);
  record.seed = cfg.seed;
  record.replicas = run_replicas(cfg);
  for (const auto& r : record.replicas) record.diverged |= r.diverged;

  record.throughput_bps = aggregate(collect(
      record.replicas, [](const EpisodeMetrics& m) { return m.network_throughput_bps; }));
  record.collision_rate = aggregate(collect(
      record.replicas, [](const EpisodeMetrics& m) { return m.collision_rate.value_or(0.0); }));
  record.access_delay_s = aggregate(collect(
      record.replicas,
      [](const EpisodeMetrics& m) {
        return m.access_delay_s.value_or(std::numeric_limits<double>::infinity());
      }));
  record.jain = aggregate(collect(
      record.replicas, [](const EpisodeMetrics& m) { return m.jains_index.value_or(0.0); }));
  record.resource_util = aggregate(collect(
      record.replicas, [](const EpisodeMetrics& m) { return m.resource_utilization; }));
  record.backoff_fraction = aggregate(collect(
      record.replicas, [](const EpisodeMetrics& m) { return m.backoff_fraction; }));

  // episodes.csv: training and evaluation metrics per episode.
  {
    std::ofstream out(out_dir / "episodes.csv", std::ios::binary);
    out << "replica,phase,episode,protocol,throughput_bps,collision_rate,"
           "access_delay_s,jain,resource_util\n";
    for (const auto& r : record.replicas) {
      for (const auto& row : r.training) {
        write_episode_csv_row(out, r.replica, "train", row.episode, cfg.protocol,
                              row.metrics);
      }
      for (size_t e = 0; e < r.eval_episodes.size(); ++e) {
        write_episode_csv_row(out, r.replica, "eval", static_cast<int>(e),
                              cfg.protocol, r.eval_episodes[e]);
      }
    }
  }

  if (cfg.is_learned()) {
    std::ofstream out(out_dir / "training_log.csv", std::ios::binary);
    out << "replica,episode,agent,cumulative_reward,actor_loss,critic_loss,entropy\n";
    for (const auto& r : record.replicas) {
      for (const auto& row : r.training) {
        for (size_t j = 0; j < row.cumulative_reward.size(); ++j) {
          out << r.replica << ',' << row.episode << ',' << j << ','
              << format_double(row.cumulative_reward[j]) << ','
              << format_double(row.actor_loss[j]) << ','
              << format_double(row.critic_loss[j]) << ','
              << format_double(row.entropy[j]) << '\n';
        }
      }
    }
  }

  // Checkpoints: replica 0 at the documented path, others in subdirectories.
  for (const auto& r : record.replicas) {
    if (r.checkpoints.empty()) continue;
    std::filesystem::path dir = out_dir / "checkpoints";
    if (r.replica != 0) dir /= "replica_" + std::to_string(r.replica);
    std::filesystem::create_directories(dir);
    for (size_t j = 0; j < r.checkpoints.size(); ++j) {
      std::ofstream out(dir / ("agent_" + std::to_string(j) + ".bin"),
                        std::ios::binary);
      out.write(r.checkpoints[j].data(),
                static_cast<std::streamsize>(r.checkpoints[j].size()));
    }
  }

  record.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json summary;
  summary["config"] = config_to_json(cfg);
  summary["config_hash"] = record.hash;
  summary["protocol"] = cfg.protocol;
  summary["diverged"] = record.diverged;
  summary["wall_clock_s"] = record.wall_clock_s;
  summary["aggregate"] = {
      {"throughput_bps", aggregate_to_json(record.throughput_bps)},
      {"collision_rate", aggregate_to_json(record.collision_rate)},
      {"access_delay_s", aggregate_to_json(record.access_delay_s)},
      {"jain", aggregate_to_json(record.jain)},
      {"resource_util", aggregate_to_json(record.resource_util)},
      {"backoff_fraction", aggregate_to_json(record.backoff_fraction)},
  };
  json replicas = json::array();
  for (const auto& r : record.replicas) {
    json jr;
    jr["replica"] = r.replica;
    jr["diverged"] = r.diverged;
    if (r.diverged) {
      jr["divergence_episode"] = r.divergence_episode;
      jr["divergence_detail"] = r.divergence_detail;
    } else {
      jr["eval"] = metrics_to_json(r.eval_pooled);
      if (!r.training.empty()) {
        jr["final_reward"] = trailing_mean_reward(r.training);
        jr["convergence_episode"] = convergence_episode(r.training);
      }
    }
    replicas.push_back(std::move(jr));
  }
  summary["replicas"] = std::move(replicas);
  std::ofstream out(out_dir / "summary.json", std::ios::binary);
  out << summary.dump(2) << '\n';

  return record;
}

namespace {

struct SweepPoint {
  std::vector<ReplicaResult> replicas;
  bool diverged = false;
  AggregateStat final_reward;
  AggregateStat convergence;
  AggregateStat throughput;
  AggregateStat collision;
  AggregateStat backoff;
  std::vector<double> reward_curve;
  std::vector<double> per_ut_backoff_mean;
};

SweepPoint run_sweep_point(const ExperimentConfig& cfg) {
  SweepPoint point;
  point.replicas = run_replicas(cfg);

  std::vector<double> rewards, convergences, throughputs, collisions, backoffs;
  for (const auto& r : point.replicas) {
    if (r.diverged) {
      point.diverged = true;
      continue;
    }
    rewards.push_back(trailing_mean_reward(r.training));
    convergences.push_back(static_cast<double>(convergence_episode(r.training)));
    throughputs.push_back(r.eval_pooled.network_throughput_bps);
    collisions.push_back(r.eval_pooled.collision_rate.value_or(0.0));
    backoffs.push_back(r.eval_pooled.backoff_fraction);
  }
  point.final_reward = aggregate(rewards);
  point.convergence = aggregate(convergences);
  point.throughput = aggregate(throughputs);
  point.collision = aggregate(collisions);
  point.backoff = aggregate(backoffs);

  // Episode-indexed reward curve, averaged over agents and replicas.
  size_t episodes = 0;
  for (const auto& r : point.replicas) {
    if (!r.diverged) episodes = std::max(episodes, r.training.size());
  }
  point.reward_curve.assign(episodes, 0.0);
  std::vector<int> counts(episodes, 0);
  for (const auto& r : point.replicas) {
    if (r.diverged) continue;
    for (size_t e = 0; e < r.training.size(); ++e) {
      double agent_mean = 0.0;
      for (double c : r.training[e].cumulative_reward) agent_mean += c;
      agent_mean /= static_cast<double>(r.training[e].cumulative_reward.size());
      point.reward_curve[e] += agent_mean;
      counts[e] += 1;
    }
  }
  for (size_t e = 0; e < episodes; ++e) {
    if (counts[e] > 0) point.reward_curve[e] /= counts[e];
  }

  // Per-UT backoff fractions, for inspecting dense-deployment behaviour.
  if (!point.replicas.empty()) {
    const size_t n_ut = static_cast<size_t>(cfg.ut_count);
    point.per_ut_backoff_mean.assign(n_ut, 0.0);
    int used = 0;
    for (const auto& r : point.replicas) {
      if (r.diverged) continue;
      for (size_t j = 0; j < n_ut; ++j) {
        point.per_ut_backoff_mean[j] += r.eval_pooled.per_ut_backoff_fraction[j];
      }
      ++used;
    }
    if (used > 0) {
      for (auto& v : point.per_ut_backoff_mean) v /= used;
    }
  }
  return point;
}

void require_learned(const ExperimentConfig& cfg, const char* sweep) {
  if (!cfg.is_learned()) {
    throw ConfigError(std::string("config: ") + sweep +
                      " requires protocol erach or erach-coop");
  }
}

}  // namespace

std::vector<SigmaSweepRow> sweep_position_error(
    const ExperimentConfig& cfg, std::span<const double> sigma2_values,
    const std::filesystem::path& out_dir) {
  require_learned(cfg, "sweep-sigma");
  std::filesystem::create_directories(out_dir);
  std::vector<SigmaSweepRow> rows;
  json points = json::array();
  for (double sigma2 : sigma2_values) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.constellation.position_noise_variance_m2 = sigma2;
    const SweepPoint point = run_sweep_point(point_cfg);
    SigmaSweepRow row;
    row.sigma2 = sigma2;
    row.diverged = point.diverged;
    row.final_reward = point.final_reward;
    row.convergence_episodes = point.convergence;
    rows.push_back(row);
    points.push_back({{"sigma2", sigma2},
                      {"diverged", row.diverged},
                      {"final_reward", aggregate_to_json(row.final_reward)},
                      {"convergence_episodes", aggregate_to_json(row.convergence_episodes)}});
  }

  std::ofstream out(out_dir / "sigma_sweep.csv", std::ios::binary);
  out << "sigma2,final_reward,final_reward_max_dev,convergence_episodes,diverged\n";
  for (const auto& row : rows) {
    out << format_double(row.sigma2) << ','
        << (row.diverged ? "nan" : format_double(row.final_reward.mean)) << ','
        << format_double(row.final_reward.max_deviation) << ','
        << (row.diverged ? "nan" : format_double(row.convergence_episodes.mean)) << ','
        << (row.diverged ? "Diverge" : "ok") << '\n';
  }
  json summary{{"config", config_to_json(cfg)}, {"rows", points}};
  std::ofstream js(out_dir / "summary.json", std::ios::binary);
  js << summary.dump(2) << '\n';
  return rows;
}

std::vector<RhoSweepRow> sweep_rho(const ExperimentConfig& cfg,
                                   std::span<const double> rho_values,
                                   const std::filesystem::path& out_dir) {
  require_learned(cfg, "sweep-rho");
  std::filesystem::create_directories(out_dir);
  std::vector<RhoSweepRow> rows;
  json points = json::array();
  for (double rho : rho_values) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.reward.rho = rho;
    if (!point_cfg.is_coop()) {
      point_cfg.reward.mode = rho == 0.0 ? RewardMode::rate_max : RewardMode::standard;
    }
    const SweepPoint point = run_sweep_point(point_cfg);
    RhoSweepRow row;
    row.rho = rho;
    row.diverged = point.diverged;
    row.throughput_bps = point.throughput;
    row.collision_rate = point.collision;
    rows.push_back(row);
    points.push_back({{"rho", rho},
                      {"diverged", row.diverged},
                      {"throughput_bps", aggregate_to_json(row.throughput_bps)},
                      {"collision_rate", aggregate_to_json(row.collision_rate)}});
  }

  std::ofstream out(out_dir / "rho_sweep.csv", std::ios::binary);
  out << "rho,throughput_bps,throughput_bps_max_dev,collision_rate,"
         "collision_rate_max_dev,diverged\n";
  for (const auto& row : rows) {
    out << format_double(row.rho) << ','
        << format_double(row.throughput_bps.mean) << ','
        << format_double(row.throughput_bps.max_deviation) << ','
        << format_double(row.collision_rate.mean) << ','
        << format_double(row.collision_rate.max_deviation) << ','
        << (row.diverged ? "Diverge" : "ok") << '\n';
  }
  json summary{{"config", config_to_json(cfg)}, {"rows", points}};
  std::ofstream js(out_dir / "summary.json", std::ios::binary);
  js << summary.dump(2) << '\n';
  return rows;
}

std::vector<StateMaskSweepRow> sweep_state_mask(
    const ExperimentConfig& cfg, std::span<const StateMask> masks,
    const std::filesystem::path& out_dir) {
  require_learned(cfg, "sweep-state");
  std::filesystem::create_directories(out_dir);
  std::vector<StateMaskSweepRow> rows;
  std::ofstream curves(out_dir / "state_sweep_curves.csv", std::ios::binary);
  curves << "mask,episode,cumulative_reward\n";
  json points = json::array();
  for (const auto& mask : masks) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.state_mask = mask;
    const SweepPoint point = run_sweep_point(point_cfg);
    StateMaskSweepRow row;
    row.label = state_mask_label(mask);
    row.diverged = point.diverged;
    row.reward_curve = point.reward_curve;
    row.final_reward = point.final_reward;
    for (size_t e = 0; e < row.reward_curve.size(); ++e) {
      curves << row.label << ',' << e << ',' << format_double(row.reward_curve[e])
             << '\n';
    }
    points.push_back({{"mask", row.label},
                      {"diverged", row.diverged},
                      {"final_reward", aggregate_to_json(row.final_reward)}});
    rows.push_back(std::move(row));
  }
  json summary{{"config", config_to_json(cfg)}, {"rows", points}};
  std::ofstream js(out_dir / "summary.json", std::ios::binary);
  js << summary.dump(2) << '\n';
  return rows;
}

std::vector<DensitySweepRow> sweep_density(
    const ExperimentConfig& cfg, std::span<const double> spacings,
    const std::filesystem::path& out_dir) {
  require_learned(cfg, "sweep-density");
  std::filesystem::create_directories(out_dir);
  std::vector<DensitySweepRow> rows;
  json points = json::array();
  for (double spacing : spacings) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.ut_spacing_m = spacing;
    const SweepPoint point = run_sweep_point(point_cfg);
    DensitySweepRow row;
    row.spacing_m = spacing;
    row.diverged = point.diverged;
    row.throughput_bps = point.throughput;
    row.collision_rate = point.collision;
    row.backoff_fraction = point.backoff;
    row.per_ut_backoff_mean = point.per_ut_backoff_mean;
    rows.push_back(row);
    points.push_back({{"spacing_m", spacing},
                      {"diverged", row.diverged},
                      {"throughput_bps", aggregate_to_json(row.throughput_bps)},
                      {"collision_rate", aggregate_to_json(row.collision_rate)},
                      {"backoff_fraction", aggregate_to_json(row.backoff_fraction)},
                      {"per_ut_backoff", row.per_ut_backoff_mean}});
  }

  std::ofstream out(out_dir / "density_sweep.csv", std::ios::binary);
  out << "spacing_m,throughput_bps,collision_rate,backoff_fraction,diverged\n";
  for (const auto& row : rows) {
    out << format_double(row.spacing_m) << ','
        << format_double(row.throughput_bps.mean) << ','
        << format_double(row.collision_rate.mean) << ','
        << format_double(row.backoff_fraction.mean) << ','
        << (row.diverged ? "Diverge" : "ok") << '\n';
  }
  json summary{{"config", config_to_json(cfg)}, {"rows", points}};
  std::ofstream js(out_dir / "summary.json", std::ios::binary);
  js << summary.dump(2) << '\n';
  return rows;
}

}  // namespace erach
