#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "erach/environment.hpp"
#include "erach/marl.hpp"

#include <nlohmann/json_fwd.hpp>

namespace erach {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Full scenario + training configuration. `protocol` and `seed` must be set
// explicitly; every other field has a default that is echoed back on output.
struct ExperimentConfig {
  std::string protocol;  // aloha | rach | erach | erach-coop
  std::uint64_t seed = 0;
  int replicas = 5;
  int eval_episodes = 20;
  int ut_count = 5;          // J
  double area_side_m = 1000.0;
  std::optional<double> ut_spacing_m;  // mean pairwise distance placement mode
  int preambles = 2;         // P
  int backoff_window = 10;   // W
  bool greedy_eval = false;
  bool per_subslot_fading = false;

  ConstellationConfig constellation;
  LinkBudget link;
  SlotTiming timing;
  RewardConfig reward;
  TrainingConfig training;   // steps_per_episode 0 = derive from timing
  StateMask state_mask;

  std::vector<double> sigma_sweep{0.0, 1e2, 1e3, 1e4};
  std::vector<double> rho_sweep{0.0, 2.0};
  std::vector<StateMask> state_mask_sweep;
  std::vector<double> density_sweep_m{1000.0, 10.0};

  bool is_learned() const { return protocol == "erach" || protocol == "erach-coop"; }
  bool is_coop() const { return protocol == "erach-coop"; }
  // Slotted ALOHA carries no preamble signatures.
  int effective_preambles() const { return protocol == "aloha" ? 1 : preambles; }
  long episode_length() const;
  void validate() const;
};

// Parses and validates a JSON config. Unknown keys and invariant violations
// raise ConfigError naming the offending key path; missing required keys are
// listed. Environment variables ERACH_<key>[__<subkey>...] override any entry.
ExperimentConfig load_config(const std::filesystem::path& path,
                             bool apply_env_overrides = true);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// Uniform placement over the configured square, or over a square scaled so
// the mean pairwise distance matches ut_spacing_m.
std::vector<Eigen::Vector3d> place_uts(const ExperimentConfig& cfg, Rng& rng);

struct ReplicaResult {
  int replica = 0;
  bool diverged = false;
  int divergence_episode = -1;
  std::string divergence_detail;
  std::vector<TrainEpisodeRow> training;      // empty for baselines
  std::vector<EpisodeMetrics> eval_episodes;
  EpisodeMetrics eval_pooled;
  std::vector<std::string> checkpoints;       // serialized actor+critic per agent
};

// Executes one replica with streams derived as child(seed, replica); fully
// deterministic and reproducible in isolation.
ReplicaResult run_replica(const ExperimentConfig& cfg, int replica);
std::vector<ReplicaResult> run_replicas(const ExperimentConfig& cfg);

struct AggregateStat {
  double mean = 0.0;
  double max_deviation = 0.0;  // max |replica - mean|
};

struct RunRecord {
  std::string hash;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::vector<ReplicaResult> replicas;
  AggregateStat throughput_bps;
  AggregateStat collision_rate;
  AggregateStat access_delay_s;
  AggregateStat jain;
  AggregateStat resource_util;
  AggregateStat backoff_fraction;
  double wall_clock_s = 0.0;
};

// Full experiment: replicas, CSV + JSON persistence, checkpoints. Output is
// byte-stable for a fixed (config, seed) apart from the recorded wall clock.
RunRecord run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Mean over the trailing `window` episodes of the agent-averaged cumulative
// reward; the sweep tables and the convergence rule below are built on it.
double trailing_mean_reward(const std::vector<TrainEpisodeRow>& rows,
                            int window = 50);
// First episode whose trailing-window mean lands within `tolerance` of the
// final trailing-window mean (relative); episode count if never reached.
int convergence_episode(const std::vector<TrainEpisodeRow>& rows,
                        int window = 50, double tolerance = 0.05);

struct SigmaSweepRow {
  double sigma2 = 0.0;
  bool diverged = false;
  AggregateStat final_reward;
  AggregateStat convergence_episodes;
};

struct RhoSweepRow {
  double rho = 0.0;
  bool diverged = false;
  AggregateStat throughput_bps;
  AggregateStat collision_rate;
};

struct StateMaskSweepRow {
  std::string label;
  bool diverged = false;
  std::vector<double> reward_curve;  // per-episode mean across agents+replicas
  AggregateStat final_reward;
};

struct DensitySweepRow {
  double spacing_m = 0.0;
  bool diverged = false;
  AggregateStat throughput_bps;
  AggregateStat collision_rate;
  AggregateStat backoff_fraction;
  std::vector<double> per_ut_backoff_mean;
};

std::vector<SigmaSweepRow> sweep_position_error(
    const ExperimentConfig& cfg, std::span<const double> sigma2_values,
    const std::filesystem::path& out_dir);
std::vector<RhoSweepRow> sweep_rho(const ExperimentConfig& cfg,
                                   std::span<const double> rho_values,
                                   const std::filesystem::path& out_dir);
std::vector<StateMaskSweepRow> sweep_state_mask(
    const ExperimentConfig& cfg, std::span<const StateMask> masks,
    const std::filesystem::path& out_dir);
std::vector<DensitySweepRow> sweep_density(
    const ExperimentConfig& cfg, std::span<const double> spacings,
    const std::filesystem::path& out_dir);

std::string state_mask_label(const StateMask& mask);

// Shortest-round-trip decimal text for CSV cells.
std::string format_double(double v);

}  // namespace erach
