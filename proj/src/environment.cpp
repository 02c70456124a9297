#include "erach/environment.hpp"

#include <stdexcept>

namespace erach {

void EnvironmentConfig::validate() const {
  constellation.validate();
  link.validate();
  timing.validate();
  if (preambles < 1) throw std::invalid_argument("environment: preambles must be >= 1");
  if (episode_length < 1) throw std::invalid_argument("environment: episode_length must be >= 1");
}

RaEnvironment::RaEnvironment(EnvironmentConfig cfg,
                             std::vector<Eigen::Vector3d> ut_positions,
                             std::uint64_t env_seed, std::uint64_t noise_seed)
    : cfg_(std::move(cfg)),
      ut_positions_(std::move(ut_positions)),
      env_rng_(env_seed),
      noise_rng_(noise_seed) {
  cfg_.validate();
  if (ut_positions_.empty()) {
    throw std::invalid_argument("environment: need at least one UT");
  }
  reset();
}

void RaEnvironment::reset() {
  // Streams are seeded once at construction and advance across episodes, so
  // successive episodes revisit the same orbit with fresh channel randomness.
  slot_ = 0;
  const int j = ut_count();
  prev_bits_.assign(static_cast<size_t>(j), 0.0);
  prev_collision_.assign(static_cast<size_t>(j), 0);
  prev_action_.assign(static_cast<size_t>(j), 0);
  // Initial fingerprint action is drawn at random, like the first state.
  std::uniform_int_distribution<int> action(0, planes());
  for (auto& a : prev_action_) a = action(env_rng_);
  outcome_ = SlotOutcome{};
  outcome_.ut.resize(static_cast<size_t>(j));
  compute_slot_positions();
}

void RaEnvironment::compute_slot_positions() {
  const auto& con = cfg_.constellation;
  const double opp = cfg_.timing.opportunity_s();
  expected_nearest_.resize(static_cast<size_t>(con.planes));
  dynamic_nearest_.resize(static_cast<size_t>(con.planes));
  for (int k = 0; k < con.planes; ++k) {
    const int idx = nearest_sat(con, k, slot_, opp);
    expected_nearest_[static_cast<size_t>(k)] =
        sat_position(con, k, idx, slot_, opp).position;
    // The noise stream is consumed every slot regardless of sigma, so runs
    // differing only in the variance see identical draws.
    dynamic_nearest_[static_cast<size_t>(k)] =
        sat_position(con, k, idx, slot_, opp, &noise_rng_).position;
  }
}

AgentObservation RaEnvironment::observe(int ut) const {
  AgentObservation obs;
  obs.slot = slot_;
  obs.episode_length = cfg_.episode_length;
  obs.nearest_sat_pos = expected_nearest_;
  obs.prev_throughput_bits = prev_bits_[static_cast<size_t>(ut)];
  obs.prev_collision = prev_collision_[static_cast<size_t>(ut)] != 0;
  obs.prev_action = prev_action_[static_cast<size_t>(ut)];
  return obs;
}

CoopObservation RaEnvironment::observe_coop(int ut) const {
  CoopObservation obs;
  obs.local = observe(ut);
  for (int j = 0; j < ut_count(); ++j) {
    obs.total_throughput_bits += prev_bits_[static_cast<size_t>(j)];
    obs.total_collisions += prev_collision_[static_cast<size_t>(j)] != 0 ? 1 : 0;
  }
  return obs;
}

const SlotOutcome& RaEnvironment::step(std::span<const RaAction> actions) {
  if (done()) throw std::logic_error("environment: episode already finished");
  if (static_cast<int>(actions.size()) != ut_count()) {
    throw std::invalid_argument("environment: action count mismatch");
  }

  outcome_ = resolve_slot(actions, planes(), cfg_.preambles);

  const int n_gains = cfg_.per_subslot_fading ? cfg_.timing.data_slots() : 1;
  std::vector<double> gains(static_cast<size_t>(n_gains));
  for (int j = 0; j < ut_count(); ++j) {
    auto& u = outcome_.ut[static_cast<size_t>(j)];
    if (!u.accessed) continue;
    const Eigen::Vector3d& sat = dynamic_nearest_[static_cast<size_t>(u.plane - 1)];
    const Eigen::Vector3d& pos = ut_positions_[static_cast<size_t>(j)];
    const double dist = (sat - pos).norm();
    const double theta = elevation_angle_deg(sat, pos);
    for (auto& g : gains) g = sample_channel(dist, theta, cfg_.link, env_rng_).gain;
    u.throughput_bits = slot_throughput_bits(gains, cfg_.link, cfg_.timing.data_s);
  }

  for (int j = 0; j < ut_count(); ++j) {
    const auto& u = outcome_.ut[static_cast<size_t>(j)];
    prev_bits_[static_cast<size_t>(j)] = u.throughput_bits;
    prev_collision_[static_cast<size_t>(j)] = u.collided ? 1 : 0;
    prev_action_[static_cast<size_t>(j)] = u.attempted ? u.plane : kBackoff;
  }

  ++slot_;
  if (!done()) compute_slot_positions();
  return outcome_;
}

}  // namespace erach
