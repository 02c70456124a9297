#pragma once

#include <optional>
#include <span>
#include <vector>

namespace erach {

// One RA opportunity = signaling phase + data phase. The backing slot tau is
// only used to express the phases as m_s/m_d integer sub-slot counts.
struct SlotTiming {
  double signaling_s = 0.010;  // tau_s
  double data_s = 0.090;       // tau_d
  double base_slot_s = 0.010;  // tau

  double opportunity_s() const { return signaling_s + data_s; }
  int signaling_slots() const;  // m_s
  int data_slots() const;       // m_d
  // N = round(T / (I * opportunity)), opportunities while one satellite
  // stays the closest on its plane.
  long opportunities_per_pass(double period_s, int sats_per_plane) const;
  void validate() const;
};

inline constexpr int kBackoff = 0;      // action choice 0
inline constexpr int kNoPreamble = 0;

// choice: 0 = backoff, 1..K = orbital plane. preamble: 1..P, present iff
// attempting (slotted ALOHA runs with an effective P of 1).
struct RaAction {
  int choice = kBackoff;
  int preamble = kNoPreamble;
  bool attempts() const { return choice != kBackoff; }
};

struct UtOutcome {
  bool attempted = false;
  bool collided = false;   // c_j
  bool accessed = false;   // eta_j
  int plane = 0;
  int preamble = 0;
  double throughput_bits = 0.0;  // R_j, filled by the environment
};

struct SlotOutcome {
  std::vector<UtOutcome> ut;
  int successes() const;
  int collisions() const;
  int attempts() const;
  double total_bits() const;
};

// Collision resolution: an attempt collides iff another UT chose the same
// (plane, preamble) pair this opportunity. Throughput is left at zero.
SlotOutcome resolve_slot(std::span<const RaAction> actions, int planes,
                         int preambles);

struct EpisodeMetrics {
  std::optional<double> collision_rate;  // collisions / attempts
  std::optional<double> access_delay_s;
  double network_throughput_bps = 0.0;
  std::vector<double> per_ut_throughput_bps;
  std::optional<double> jains_index;
  double resource_utilization = 0.0;
  double backoff_fraction = 0.0;
  std::vector<double> per_ut_backoff_fraction;
};

// Streaming accumulator over slot outcomes; finalize() is recomputable from
// the per-slot tape (the tests hold it to that).
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(int ut_count);
  void add(const SlotOutcome& outcome);
  EpisodeMetrics finalize(const SlotTiming& timing, int planes,
                          int preambles) const;
  long slots() const { return slots_; }

 private:
  int ut_count_;
  long slots_ = 0;
  long attempts_ = 0;
  long collisions_ = 0;
  long successes_ = 0;
  std::vector<long> ut_successes_;
  std::vector<long> ut_backoffs_;
  std::vector<double> ut_bits_;
};

// Metric operations on a full outcome tape.
std::optional<double> collision_rate(std::span<const SlotOutcome> outcomes);
std::optional<double> access_delay_s(long opportunities,
                                     double mean_successes_per_ut,
                                     const SlotTiming& timing);
double network_throughput_bps(std::span<const SlotOutcome> outcomes,
                              const SlotTiming& timing);
std::optional<double> jains_fairness(std::span<const double> per_ut_throughput);
double resource_utilization(std::span<const SlotOutcome> outcomes, int planes,
                            int preambles);

}  // namespace erach
