#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "erach/harness.hpp"

using namespace erach;
using nlohmann::json;

namespace {

json minimal_config() { return json{{"protocol", "aloha"}, {"seed", 42}}; }

ExperimentConfig desk_config(const char* protocol) {
  ExperimentConfig cfg = config_from_json(minimal_config());
  cfg.protocol = protocol;
  cfg.link.ref_gain = 7e11;
  cfg.reward.mean_bits = 9e5;
  cfg.reward.scale_bits = 1.5e7;
  cfg.replicas = 2;
  cfg.eval_episodes = 2;
  cfg.training.episodes = 3;
  cfg.training.steps_per_episode = 40;
  if (cfg.is_coop()) cfg.reward.mode = RewardMode::coop;
  return cfg;
}

std::filesystem::path temp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "erach_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal config materializes the tabulated defaults") {
  const ExperimentConfig cfg = config_from_json(minimal_config());
  CHECK(cfg.ut_count == 5);
  CHECK(cfg.preambles == 2);
  CHECK(cfg.constellation.sats_per_plane == 22);
  CHECK(cfg.constellation.altitude_m == 550e3);
  CHECK(cfg.constellation.period_s == 5728.0);
  CHECK(cfg.link.bandwidth_hz == 1e8);
  CHECK(cfg.link.pathloss_exponent == 2.1);
  CHECK(cfg.timing.signaling_s == 0.010);
  CHECK(cfg.timing.data_s == 0.090);
  CHECK(cfg.backoff_window == 10);
  CHECK(cfg.training.optimizer.learning_rate == 1e-4);
  CHECK(cfg.episode_length() == 2604);

  // echoed config materializes the derived episode length
  const json echo = config_to_json(cfg);
  CHECK(echo["training"]["steps_per_episode"] == 2604);
}

TEST_CASE("required keys are reported together") {
  try {
    config_from_json(json::object());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("protocol") != std::string::npos);
    CHECK(msg.find("seed") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with their path") {
  json j = minimal_config();
  j["constellation"]["altitud_m"] = 1.0;  // typo
  try {
    config_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("constellation.altitud_m") != std::string::npos);
  }
}

TEST_CASE("invariant violations name the offending key") {
  json j = minimal_config();
  j["protocol"] = "csma";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);

  j = minimal_config();
  j["reward"] = {{"scale_bits", -1.0}};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("config round-trips through serialization") {
  json j = minimal_config();
  j["protocol"] = "erach";
  j["ut_spacing_m"] = 10.0;
  j["state_components"] = {"positions", "collision"};
  j["training"] = {{"episodes", 77}};
  const ExperimentConfig cfg = config_from_json(j);
  const ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(back.training.episodes == 77);
  CHECK(back.ut_spacing_m.value() == 10.0);
  CHECK_FALSE(back.state_mask.time);
  CHECK(back.state_mask.positions);
}

TEST_CASE("blank config files report the required keys") {
  const auto dir = temp_dir("blank");
  const auto path = dir / "empty.json";
  std::ofstream(path) << "\n";
  CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("environment variables override config keys") {
  const auto dir = temp_dir("env_override");
  const auto path = dir / "cfg.json";
  std::ofstream(path) << minimal_config().dump();

  setenv("ERACH_protocol", "rach", 1);
  setenv("ERACH_training__episodes", "9", 1);
  setenv("ERACH_constellation__planes", "2", 1);
  const ExperimentConfig cfg = load_config(path);
  unsetenv("ERACH_protocol");
  unsetenv("ERACH_training__episodes");
  unsetenv("ERACH_constellation__planes");

  CHECK(cfg.protocol == "rach");
  CHECK(cfg.training.episodes == 9);
}

TEST_CASE("area placement is uniform over the configured square") {
  ExperimentConfig cfg = config_from_json(minimal_config());
  cfg.ut_count = 1;
  Rng rng(1234);
  const int draws = 10000;
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto uts = place_uts(cfg, rng);
    REQUIRE(uts.size() == 1);
    CHECK(std::abs(uts[0].x()) <= 500.0);
    CHECK(std::abs(uts[0].y()) <= 500.0);
    CHECK(uts[0].z() == 0.0);
    mx += uts[0].x();
    my += uts[0].y();
  }
  // mean at the area centre within 3 standard errors
  const double se = 1000.0 / std::sqrt(12.0) / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(mx / draws) < 3.0 * se);
  CHECK(std::abs(my / draws) < 3.0 * se);
}

TEST_CASE("spacing placement controls the mean pairwise distance") {
  ExperimentConfig cfg = config_from_json(minimal_config());
  cfg.ut_spacing_m = 10.0;
  Rng rng(99);
  double mean_pairwise = 0.0;
  long pairs = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const auto uts = place_uts(cfg, rng);
    for (size_t a = 0; a < uts.size(); ++a) {
      for (size_t b = a + 1; b < uts.size(); ++b) {
        const double d = (uts[a] - uts[b]).norm();
        CHECK(d < 100.0);  // dense case stays tight
        mean_pairwise += d;
        ++pairs;
      }
    }
  }
  CHECK(mean_pairwise / static_cast<double>(pairs) ==
        doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("baseline replicas skip training and produce eval metrics") {
  const ExperimentConfig cfg = desk_config("aloha");
  const ReplicaResult r = run_replica(cfg, 0);
  CHECK(r.training.empty());
  CHECK(r.checkpoints.empty());
  CHECK(r.eval_episodes.size() == 2);
  CHECK(r.eval_pooled.collision_rate.has_value());
  CHECK_FALSE(r.diverged);
}

TEST_CASE("learned replicas train, evaluate and checkpoint") {
  const ExperimentConfig cfg = desk_config("erach");
  const ReplicaResult r = run_replica(cfg, 0);
  CHECK(r.training.size() == 3);
  CHECK(r.checkpoints.size() == 5);
  CHECK(r.eval_episodes.size() == 2);
  for (const auto& row : r.training) {
    CHECK(row.cumulative_reward.size() == 5);
  }
}

TEST_CASE("run writes byte-identical outputs for identical config and seed") {
  const ExperimentConfig cfg = desk_config("erach");
  const auto dir_a = temp_dir("determinism_a");
  const auto dir_b = temp_dir("determinism_b");
  const RunRecord rec_a = run(cfg, dir_a);
  const RunRecord rec_b = run(cfg, dir_b);
  CHECK(rec_a.hash == rec_b.hash);
  CHECK(slurp(dir_a / "episodes.csv") == slurp(dir_b / "episodes.csv"));
  CHECK(slurp(dir_a / "training_log.csv") == slurp(dir_b / "training_log.csv"));
  for (int j = 0; j < 5; ++j) {
    const auto name = "agent_" + std::to_string(j) + ".bin";
    CHECK(slurp(dir_a / "checkpoints" / name) == slurp(dir_b / "checkpoints" / name));
  }
  CHECK(std::filesystem::exists(dir_a / "summary.json"));
}

TEST_CASE("summary statistics are recomputable from the replica rows") {
  const ExperimentConfig cfg = desk_config("aloha");
  const auto dir = temp_dir("recompute");
  const RunRecord rec = run(cfg, dir);
  REQUIRE(rec.replicas.size() == 2);
  const double mean = (rec.replicas[0].eval_pooled.network_throughput_bps +
                       rec.replicas[1].eval_pooled.network_throughput_bps) / 2.0;
  CHECK(rec.throughput_bps.mean == doctest::Approx(mean).epsilon(1e-9));
}

TEST_CASE("trailing reward and convergence rule") {
  std::vector<TrainEpisodeRow> rows(100);
  for (int e = 0; e < 100; ++e) {
    rows[static_cast<size_t>(e)].episode = e;
    // ramps to 1.0 by episode 60, flat afterwards
    const double value = e < 60 ? e / 60.0 : 1.0;
    rows[static_cast<size_t>(e)].cumulative_reward = {value, value};
  }
  // trailing 50 covers episodes 50..99: ten ramp points then forty at 1.0
  const double expected = ((50.0 + 51 + 52 + 53 + 54 + 55 + 56 + 57 + 58 + 59) / 60.0 + 40.0) / 50.0;
  CHECK(trailing_mean_reward(rows, 50) == doctest::Approx(expected));
  const int conv = convergence_episode(rows, 50, 0.05);
  CHECK(conv > 30);
  CHECK(conv <= 100);

  // constant curve converges immediately
  for (auto& row : rows) row.cumulative_reward = {2.0, 2.0};
  CHECK(convergence_episode(rows, 50, 0.05) == 1);
}

TEST_CASE("rho sweep relabels the reward mode per point") {
  ExperimentConfig cfg = desk_config("erach");
  cfg.replicas = 1;
  cfg.training.episodes = 2;
  const auto dir = temp_dir("rho_sweep");
  const std::vector<double> rhos{0.0, 2.0};
  const auto rows = sweep_rho(cfg, rhos, dir);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rho == 0.0);
  CHECK(rows[1].rho == 2.0);
  CHECK_FALSE(rows[0].diverged);
  CHECK(std::filesystem::exists(dir / "rho_sweep.csv"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
}

TEST_CASE("sigma sweep emits one row per variance") {
  ExperimentConfig cfg = desk_config("erach");
  cfg.replicas = 1;
  cfg.training.episodes = 2;
  const auto dir = temp_dir("sigma_sweep");
  const std::vector<double> sigmas{0.0, 100.0};
  const auto rows = sweep_position_error(cfg, sigmas, dir);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].sigma2 == 0.0);
  CHECK(rows[1].sigma2 == 100.0);
  CHECK(std::filesystem::exists(dir / "sigma_sweep.csv"));

  // sweeps reject non-trainable protocols
  ExperimentConfig aloha = desk_config("aloha");
  CHECK_THROWS_AS(sweep_position_error(aloha, sigmas, dir), ConfigError);
}

TEST_CASE("state sweep labels masks and persists curves") {
  ExperimentConfig cfg = desk_config("erach");
  cfg.replicas = 1;
  cfg.training.episodes = 2;
  const auto dir = temp_dir("state_sweep");
  const std::vector<StateMask> masks{StateMask{},
                                     StateMask{false, true, false, true, false},
                                     StateMask{false, false, false, false, false}};
  const auto rows = sweep_state_mask(cfg, masks, dir);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].label == "time+positions+throughput+collision+prev_action");
  CHECK(rows[1].label == "positions+collision");
  CHECK(rows[2].label == "none");  // degenerate mask still trains
  CHECK_FALSE(rows[2].diverged);
  CHECK(rows[0].reward_curve.size() == 2);
  CHECK(std::filesystem::exists(dir / "state_sweep_curves.csv"));
}

TEST_CASE("density sweep reports backoff fractions per spacing") {
  ExperimentConfig cfg = desk_config("erach");
  cfg.replicas = 1;
  cfg.training.episodes = 2;
  const auto dir = temp_dir("density_sweep");
  const std::vector<double> spacings{1000.0, 10.0};
  const auto rows = sweep_density(cfg, spacings, dir);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].per_ut_backoff_mean.size() == 5);
  CHECK(std::filesystem::exists(dir / "density_sweep.csv"));
}

TEST_CASE("coop replicas run the cheap-talk pipeline end to end") {
  const ExperimentConfig cfg = desk_config("erach-coop");
  const ReplicaResult r = run_replica(cfg, 0);
  CHECK_FALSE(r.diverged);
  CHECK(r.training.size() == 3);
  CHECK(r.eval_pooled.collision_rate.has_value());
}
