#include "erach/agents.hpp"

namespace erach {

RaAction AlohaPolicy::act(const AgentObservation&, Rng& rng) {
  std::uniform_int_distribution<int> plane(1, planes_);
  return {plane(rng), 1};
}

RaAction RachPolicy::act(const AgentObservation&, Rng& rng) {
  if (backoff_remaining_ > 0) {
    --backoff_remaining_;
    return {kBackoff, kNoPreamble};
  }
  std::uniform_int_distribution<int> plane(1, planes_);
  std::uniform_int_distribution<int> preamble(1, preambles_);
  return {plane(rng), preamble(rng)};
}

void RachPolicy::notify(const UtOutcome& outcome, Rng& rng) {
  if (outcome.attempted && outcome.collided) {
    std::uniform_int_distribution<int> backoff(1, window_);
    backoff_remaining_ = backoff(rng);
  }
}

}  // namespace erach
