#include "erach/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace erach {

void LinkBudget::validate() const {
  if (bandwidth_hz <= 0) throw std::invalid_argument("link: bandwidth_hz must be > 0");
  if (pathloss_exponent <= 0) throw std::invalid_argument("link: pathloss_exponent must be > 0");
  if (nlos_attenuation <= 0 || nlos_attenuation > 1) {
    throw std::invalid_argument("link: nlos_attenuation must be in (0, 1]");
  }
  if (snr_scale() <= 0) {
    throw std::invalid_argument("link: tx_power * ref_gain / noise_variance must be > 0");
  }
}

double elevation_angle_deg(const Eigen::Vector3d& sat_pos,
                           const Eigen::Vector3d& ut_pos) {
  const double dist = (sat_pos - ut_pos).norm();
  if (dist == 0.0) throw std::domain_error("elevation_angle: coincident positions");
  const double dz = sat_pos.z() - ut_pos.z();
  if (dz < 0.0) throw std::domain_error("elevation_angle: satellite below terminal");
  return 180.0 / M_PI * std::asin(std::min(1.0, dz / dist));
}

double los_probability(double theta_deg, double l1, double l2) {
  return 1.0 / (1.0 + l1 * std::exp(-l2 * (theta_deg - l1)));
}

double large_scale_gain(double dist_m, bool is_los, const LinkBudget& budget) {
  if (dist_m <= 0.0) throw std::domain_error("large_scale_gain: distance must be > 0");
  const double gain = budget.ref_gain * std::pow(dist_m, -budget.pathloss_exponent);
  return is_los ? gain : budget.nlos_attenuation * gain;
}

double expected_gain(double dist_m, double theta_deg, const LinkBudget& budget) {
  const double phi = los_probability(theta_deg, budget.los_l1, budget.los_l2);
  const double phi_tilde = phi + budget.nlos_attenuation * (1.0 - phi);
  return phi_tilde * budget.ref_gain * std::pow(dist_m, -budget.pathloss_exponent);
}

ChannelDraw sample_channel(double dist_m, double theta_deg,
                           const LinkBudget& budget, Rng& rng) {
  const double phi = los_probability(theta_deg, budget.los_l1, budget.los_l2);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ChannelDraw draw;
  draw.elevation_deg = theta_deg;
  draw.is_los = uniform(rng) < phi;
  draw.gain = large_scale_gain(dist_m, draw.is_los, budget);
  if (budget.small_scale == LinkBudget::SmallScale::rayleigh) {
    std::exponential_distribution<double> expo(1.0);  // unit-mean |h~|^2
    draw.gain *= expo(rng);
  }
  return draw;
}

double slot_throughput_bits(std::span<const double> gains,
                            const LinkBudget& budget, double data_duration_s) {
  if (gains.empty()) return 0.0;
  const double per_gain_s = data_duration_s / static_cast<double>(gains.size());
  const double snr_per_gain = budget.tx_power_w / budget.noise_variance_w;
  double bits = 0.0;
  for (double g : gains) {
    bits += budget.bandwidth_hz * std::log2(1.0 + snr_per_gain * g) * per_gain_s;
  }
  return bits;
}

}  // namespace erach
