#pragma once

#include "erach/access.hpp"
#include "erach/observation.hpp"
#include "erach/random.hpp"

namespace erach {

// Common access-policy interface. Each agent owns its state; act() for every
// UT completes before the slot is resolved, notify() runs after.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual RaAction act(const AgentObservation& obs, Rng& rng) = 0;
  // Cooperative policies override this; everyone else sees the local view.
  virtual RaAction act_coop(const CoopObservation& obs, Rng& rng) {
    return act(obs.local, rng);
  }
  virtual void notify(const UtOutcome& outcome, Rng& rng) { (void)outcome; (void)rng; }
  virtual void reset(Rng& rng) { (void)rng; }
};

// Slotted ALOHA: always attempts, uniform plane, no preamble signatures
// (runs with an effective P of 1, preamble fixed to 1).
class AlohaPolicy final : public Policy {
 public:
  explicit AlohaPolicy(int planes) : planes_(planes) {}
  RaAction act(const AgentObservation&, Rng& rng) override;

 private:
  int planes_;
};

// Cellular 2-step RACH: uniform plane and preamble; after a collision, skips
// a DU(1, W) number of opportunities before re-attempting.
class RachPolicy final : public Policy {
 public:
  RachPolicy(int planes, int preambles, int backoff_window)
      : planes_(planes), preambles_(preambles), window_(backoff_window) {}
  RaAction act(const AgentObservation&, Rng& rng) override;
  void notify(const UtOutcome& outcome, Rng& rng) override;
  void reset(Rng&) override { backoff_remaining_ = 0; }

  int backoff_remaining() const { return backoff_remaining_; }

 private:
  int planes_;
  int preambles_;
  int window_;
  int backoff_remaining_ = 0;
};

}  // namespace erach
