#pragma once

#include <Eigen/Core>
#include <vector>

#include "erach/random.hpp"

namespace erach {

// Geometry of the orbital shell: K anti-parallel planes of I equally spaced
// satellites, each plane approximated as a line segment over the UT area.
struct ConstellationConfig {
  int planes = 2;                      // K
  int sats_per_plane = 22;             // I
  double altitude_m = 550e3;
  double orbit_radius_m = 6.921e6;
  double circumference_m = 4.3486e7;
  std::vector<double> speed_mps{7590.0, -7590.0};  // signed, one per plane
  double inter_sat_distance_m = 1.977e6;
  double period_s = 5728.0;
  double grav_const = 6.673e-11;       // m^3 kg^-1 s^-2
  double earth_mass_kg = 5.98e24;
  double position_noise_variance_m2 = 0.0;  // sigma_i^2, per axis
  double cross_track_offset_m = 0.0;   // lateral separation between planes
  double initial_offset_m = 0.0;       // along-track offset of sat 0 at t=0

  // Spacing and along-track speed are derived from (circumference, period) so
  // that trajectories are exactly periodic and handovers land every T/I.
  // The tabulated speed/spacing fields are validated against these within
  // 0.5% but are not used for propagation.
  double sat_spacing_m() const { return circumference_m / sats_per_plane; }
  double along_track_speed(int plane) const;
  double handover_interval_s() const { return period_s / sats_per_plane; }

  void validate() const;  // throws std::invalid_argument with the failing field
};

struct SatPosition {
  int plane = 0;
  int sat = 0;
  Eigen::Vector3d position{0, 0, 0};
  Eigen::Vector3d velocity{0, 0, 0};
  long slot = 0;
};

struct OrbitDerivation {
  double period_s;
  double speed_mps;
};

// Circular-orbit relations 4*pi^2*r^3 = T^2*G*M and V^2*r = G*M.
OrbitDerivation derive_orbit(double orbit_radius_m, double grav_const,
                             double earth_mass_kg);

// Position of satellite `sat` of `plane` at the start of opportunity `slot`.
// The along-track coordinate advances linearly, wraps modulo the orbit
// circumference and is re-centred on the UT area, so exactly one satellite
// per plane is near the origin at any time. If `noise_rng` is given, adds
// zero-mean Gaussian noise per axis with the configured variance (three
// normal draws are consumed even when the variance is zero, to keep streams
// aligned across noise sweeps).
SatPosition sat_position(const ConstellationConfig& cfg, int plane, int sat,
                         long slot, double slot_duration_s,
                         Rng* noise_rng = nullptr);

// Index of the satellite on `plane` closest to the UT-area centre at the
// start of `slot`, from noiseless positions (deterministic).
int nearest_sat(const ConstellationConfig& cfg, int plane, long slot,
                double slot_duration_s);

}  // namespace erach
