#pragma once

#include <Eigen/Core>
#include <span>

#include "erach/random.hpp"

namespace erach {

// Line-of-sight probability channel with distance power law and optional
// Rayleigh small-scale fading. Only the composite Gamma*beta_o/sigma_n^2
// affects rates; the shipped ref_gain is calibrated against the RACH
// baseline's network throughput (see configs/table1.json).
struct LinkBudget {
  double bandwidth_hz = 1e8;       // B
  double pathloss_exponent = 2.1;  // alpha
  double los_l1 = 10.0;            // L1
  double los_l2 = 0.6;             // L2
  double nlos_attenuation = 0.2;   // kappa
  double ref_gain = 1.0;           // beta_o, power gain at 1 m
  double tx_power_w = 1.0;         // Gamma
  double noise_variance_w = 1.0;   // sigma_n^2

  enum class SmallScale { rayleigh, none };
  SmallScale small_scale = SmallScale::rayleigh;

  double snr_scale() const { return tx_power_w * ref_gain / noise_variance_w; }
  void validate() const;
};

struct ChannelDraw {
  bool is_los = true;
  double gain = 0.0;  // |h|^2 including large- and small-scale factors
  double elevation_deg = 0.0;
};

// Elevation angle in degrees: (180/pi) * asin(dz / distance), in [0, 90].
double elevation_angle_deg(const Eigen::Vector3d& sat_pos,
                           const Eigen::Vector3d& ut_pos);

// 1 / (1 + L1 * exp(-L2 * (theta - L1))), strictly inside (0, 1).
double los_probability(double theta_deg, double l1, double l2);

// beta_o * d^-alpha, attenuated by kappa on the NLoS branch.
double large_scale_gain(double dist_m, bool is_los, const LinkBudget& budget);

// Mixture over the LoS Bernoulli: phi_tilde * beta_o * d^-alpha with
// phi_tilde = phi + kappa * (1 - phi).
double expected_gain(double dist_m, double theta_deg, const LinkBudget& budget);

// Draws the LoS state and a unit-mean small-scale power factor.
ChannelDraw sample_channel(double dist_m, double theta_deg,
                           const LinkBudget& budget, Rng& rng);

// Bits delivered over the data phase: each entry of `gains` covers an equal
// share of `data_duration_s` at B*log2(1 + Gamma*g/sigma_n^2). An empty span
// (no access this opportunity) yields 0 bits.
double slot_throughput_bits(std::span<const double> gains,
                            const LinkBudget& budget, double data_duration_s);

}  // namespace erach
