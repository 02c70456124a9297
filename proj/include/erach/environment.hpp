#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "erach/access.hpp"
#include "erach/channel.hpp"
#include "erach/constellation.hpp"
#include "erach/observation.hpp"
#include "erach/random.hpp"

namespace erach {

struct EnvironmentConfig {
  ConstellationConfig constellation;
  LinkBudget link;
  SlotTiming timing;
  int preambles = 2;          // effective P for this run
  long episode_length = 2604; // opportunities per episode
  bool per_subslot_fading = false;
  void validate() const;
};

// The RA slot machine: per opportunity it resolves contention, samples the
// channel to the chosen plane's nearest satellite and reports throughput.
// Observations carry the expected (noiseless, periodic) satellite positions;
// channel dynamics use positions perturbed by the configured noise variance.
class RaEnvironment {
 public:
  RaEnvironment(EnvironmentConfig cfg, std::vector<Eigen::Vector3d> ut_positions,
                std::uint64_t env_seed, std::uint64_t noise_seed);

  void reset();
  bool done() const { return slot_ >= cfg_.episode_length; }
  long slot() const { return slot_; }

  AgentObservation observe(int ut) const;
  CoopObservation observe_coop(int ut) const;

  // Resolves one opportunity and advances to the next slot.
  const SlotOutcome& step(std::span<const RaAction> actions);
  const SlotOutcome& last_outcome() const { return outcome_; }

  int ut_count() const { return static_cast<int>(ut_positions_.size()); }
  int planes() const { return cfg_.constellation.planes; }
  int preambles() const { return cfg_.preambles; }
  long episode_length() const { return cfg_.episode_length; }
  const EnvironmentConfig& config() const { return cfg_; }
  const std::vector<Eigen::Vector3d>& ut_positions() const { return ut_positions_; }

  // Noiseless nearest-satellite positions at the current slot, one per plane.
  const std::vector<Eigen::Vector3d>& expected_nearest_positions() const {
    return expected_nearest_;
  }

 private:
  void compute_slot_positions();

  EnvironmentConfig cfg_;
  std::vector<Eigen::Vector3d> ut_positions_;
  Rng env_rng_;
  Rng noise_rng_;

  long slot_ = 0;
  std::vector<Eigen::Vector3d> expected_nearest_;  // per plane
  std::vector<Eigen::Vector3d> dynamic_nearest_;   // per plane, noise applied
  SlotOutcome outcome_;

  std::vector<double> prev_bits_;
  std::vector<char> prev_collision_;
  std::vector<int> prev_action_;
};

}  // namespace erach
