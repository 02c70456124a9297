#pragma once

#include <Eigen/Core>
#include <vector>

namespace erach {

// What a single UT may observe at the start of an opportunity: the slot
// fingerprint, the expected (noiseless) nearest-satellite position per plane,
// and its own previous outcome. Deliberately cannot carry other agents' data.
struct AgentObservation {
  long slot = 0;
  long episode_length = 1;
  std::vector<Eigen::Vector3d> nearest_sat_pos;  // one per plane
  double prev_throughput_bits = 0.0;
  bool prev_collision = false;
  int prev_action = 0;  // 0 = backoff, 1..K = plane
};

// Cooperative variant: the local view plus cheap-talk aggregates over all UTs.
struct CoopObservation {
  AgentObservation local;
  double total_throughput_bits = 0.0;
  int total_collisions = 0;
};

}  // namespace erach
