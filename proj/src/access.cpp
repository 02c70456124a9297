#include "erach/access.hpp"

#include <cmath>
#include <stdexcept>

namespace erach {

int SlotTiming::signaling_slots() const {
  return static_cast<int>(std::lround(signaling_s / base_slot_s));
}

int SlotTiming::data_slots() const {
  return static_cast<int>(std::lround(data_s / base_slot_s));
}

long SlotTiming::opportunities_per_pass(double period_s,
                                        int sats_per_plane) const {
  return std::lround(period_s / (sats_per_plane * opportunity_s()));
}

void SlotTiming::validate() const {
  if (signaling_s <= 0 || data_s <= 0 || base_slot_s <= 0) {
    throw std::invalid_argument("timing: durations must be > 0");
  }
  const double ms = signaling_s / base_slot_s;
  const double md = data_s / base_slot_s;
  if (std::abs(ms - std::round(ms)) > 1e-9 ||
      std::abs(md - std::round(md)) > 1e-9) {
    throw std::invalid_argument(
        "timing: signaling_s and data_s must be integer multiples of base_slot_s");
  }
}

int SlotOutcome::successes() const {
  int n = 0;
  for (const auto& u : ut) n += u.accessed ? 1 : 0;
  return n;
}

int SlotOutcome::collisions() const {
  int n = 0;
  for (const auto& u : ut) n += u.collided ? 1 : 0;
  return n;
}

int SlotOutcome::attempts() const {
  int n = 0;
  for (const auto& u : ut) n += u.attempted ? 1 : 0;
  return n;
}

double SlotOutcome::total_bits() const {
  double b = 0.0;
  for (const auto& u : ut) b += u.throughput_bits;
  return b;
}

SlotOutcome resolve_slot(std::span<const RaAction> actions, int planes,
                         int preambles) {
  std::vector<int> occupancy(static_cast<size_t>(planes) * preambles, 0);
  for (const auto& a : actions) {
    if (!a.attempts()) {
      if (a.preamble != kNoPreamble) {
        throw std::invalid_argument("resolve_slot: backoff action carries a preamble");
      }
      continue;
    }
    if (a.choice < 1 || a.choice > planes || a.preamble < 1 ||
        a.preamble > preambles) {
      throw std::invalid_argument("resolve_slot: action out of range");
    }
    occupancy[static_cast<size_t>(a.choice - 1) * preambles + (a.preamble - 1)]++;
  }

  SlotOutcome out;
  out.ut.resize(actions.size());
  for (size_t j = 0; j < actions.size(); ++j) {
    const auto& a = actions[j];
    auto& u = out.ut[j];
    if (!a.attempts()) continue;
    u.attempted = true;
    u.plane = a.choice;
    u.preamble = a.preamble;
    const int same =
        occupancy[static_cast<size_t>(a.choice - 1) * preambles + (a.preamble - 1)];
    u.collided = same >= 2;
    u.accessed = !u.collided;
  }
  return out;
}

MetricsAccumulator::MetricsAccumulator(int ut_count)
    : ut_count_(ut_count),
      ut_successes_(ut_count, 0),
      ut_backoffs_(ut_count, 0),
      ut_bits_(ut_count, 0.0) {}

void MetricsAccumulator::add(const SlotOutcome& outcome) {
  if (static_cast<int>(outcome.ut.size()) != ut_count_) {
    throw std::invalid_argument("metrics: outcome UT count mismatch");
  }
  ++slots_;
  for (int j = 0; j < ut_count_; ++j) {
    const auto& u = outcome.ut[static_cast<size_t>(j)];
    if (u.attempted) {
      ++attempts_;
      collisions_ += u.collided ? 1 : 0;
      if (u.accessed) {
        ++successes_;
        ++ut_successes_[static_cast<size_t>(j)];
        ut_bits_[static_cast<size_t>(j)] += u.throughput_bits;
      }
    } else {
      ++ut_backoffs_[static_cast<size_t>(j)];
    }
  }
}

EpisodeMetrics MetricsAccumulator::finalize(const SlotTiming& timing,
                                            int planes, int preambles) const {
  EpisodeMetrics m;
  if (attempts_ > 0) {
    m.collision_rate = static_cast<double>(collisions_) / attempts_;
  }
  const double mean_successes =
      static_cast<double>(successes_) / std::max(1, ut_count_);
  m.access_delay_s = access_delay_s(slots_, mean_successes, timing);

  double total_bits = 0.0;
  m.per_ut_throughput_bps.resize(static_cast<size_t>(ut_count_));
  for (int j = 0; j < ut_count_; ++j) {
    total_bits += ut_bits_[static_cast<size_t>(j)];
    m.per_ut_throughput_bps[static_cast<size_t>(j)] =
        slots_ > 0 ? ut_bits_[static_cast<size_t>(j)] / slots_ / timing.opportunity_s()
                   : 0.0;
  }
  m.network_throughput_bps =
      slots_ > 0 ? total_bits / slots_ / timing.opportunity_s() : 0.0;
  m.jains_index = jains_fairness(m.per_ut_throughput_bps);
  m.resource_utilization =
      slots_ > 0 ? static_cast<double>(successes_) /
                       (static_cast<double>(slots_) * planes * preambles)
                 : 0.0;

  long backoffs = 0;
  m.per_ut_backoff_fraction.resize(static_cast<size_t>(ut_count_));
  for (int j = 0; j < ut_count_; ++j) {
    backoffs += ut_backoffs_[static_cast<size_t>(j)];
    m.per_ut_backoff_fraction[static_cast<size_t>(j)] =
        slots_ > 0 ? static_cast<double>(ut_backoffs_[static_cast<size_t>(j)]) / slots_
                   : 0.0;
  }
  m.backoff_fraction =
      slots_ > 0 ? static_cast<double>(backoffs) / (static_cast<double>(slots_) * ut_count_)
                 : 0.0;
  return m;
}

std::optional<double> collision_rate(std::span<const SlotOutcome> outcomes) {
  long attempts = 0;
  long collisions = 0;
  for (const auto& o : outcomes) {
    attempts += o.attempts();
    collisions += o.collisions();
  }
  if (attempts == 0) return std::nullopt;
  return static_cast<double>(collisions) / attempts;
}

std::optional<double> access_delay_s(long opportunities,
                                     double mean_successes_per_ut,
                                     const SlotTiming& timing) {
  if (mean_successes_per_ut <= 0) return std::nullopt;
  const double failed = static_cast<double>(opportunities) - mean_successes_per_ut;
  return failed / mean_successes_per_ut * timing.opportunity_s() +
         timing.signaling_s;
}

double network_throughput_bps(std::span<const SlotOutcome> outcomes,
                              const SlotTiming& timing) {
  if (outcomes.empty()) return 0.0;
  double bits = 0.0;
  for (const auto& o : outcomes) bits += o.total_bits();
  return bits / static_cast<double>(outcomes.size()) / timing.opportunity_s();
}

std::optional<double> jains_fairness(std::span<const double> per_ut_throughput) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double x : per_ut_throughput) {
    sum += x;
    sum_sq += x * x;
  }
  if (per_ut_throughput.empty() || sum_sq == 0.0) return std::nullopt;
  return sum * sum / (static_cast<double>(per_ut_throughput.size()) * sum_sq);
}

double resource_utilization(std::span<const SlotOutcome> outcomes, int planes,
                            int preambles) {
  if (outcomes.empty()) return 0.0;
  long successes = 0;
  for (const auto& o : outcomes) successes += o.successes();
  return static_cast<double>(successes) /
         (static_cast<double>(outcomes.size()) * planes * preambles);
}

}  // namespace erach
