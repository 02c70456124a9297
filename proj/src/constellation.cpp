#include "erach/constellation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace erach {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("constellation: " + what);
}

// Wrap an along-track coordinate into [-c/2, c/2) around the UT area centre.
double wrap_centered(double u, double circumference) {
  return u - circumference * std::floor(u / circumference + 0.5);
}

}  // namespace

double ConstellationConfig::along_track_speed(int plane) const {
  const double sign = speed_mps.at(static_cast<size_t>(plane)) < 0 ? -1.0 : 1.0;
  return sign * circumference_m / period_s;
}

void ConstellationConfig::validate() const {
  require(planes >= 1, "planes must be >= 1");
  require(sats_per_plane >= 1, "sats_per_plane must be >= 1");
  require(altitude_m > 0, "altitude_m must be > 0");
  require(orbit_radius_m > altitude_m, "orbit_radius_m must exceed altitude_m");
  require(circumference_m > 0, "circumference_m must be > 0");
  require(period_s > 0, "period_s must be > 0");
  require(grav_const > 0 && earth_mass_kg > 0, "G and M must be > 0");
  require(position_noise_variance_m2 >= 0,
          "position_noise_variance_m2 must be >= 0");
  require(static_cast<int>(speed_mps.size()) == planes,
          "speed_mps needs one signed entry per plane");
  for (double v : speed_mps) {
    require(std::abs(std::abs(v) * period_s - circumference_m) <=
                0.005 * circumference_m,
            "|speed| * period must match circumference within 0.5%");
  }
  require(std::abs(sats_per_plane * inter_sat_distance_m - circumference_m) <=
              0.005 * circumference_m,
          "I * inter_sat_distance must match circumference within 0.5%");
}

OrbitDerivation derive_orbit(double orbit_radius_m, double grav_const,
                             double earth_mass_kg) {
  if (orbit_radius_m <= 0 || grav_const <= 0 || earth_mass_kg <= 0) {
    throw std::domain_error("derive_orbit: inputs must be positive");
  }
  const double gm = grav_const * earth_mass_kg;
  const double r3 = orbit_radius_m * orbit_radius_m * orbit_radius_m;
  return {std::sqrt(4.0 * M_PI * M_PI * r3 / gm),
          std::sqrt(gm / orbit_radius_m)};
}

SatPosition sat_position(const ConstellationConfig& cfg, int plane, int sat,
                         long slot, double slot_duration_s, Rng* noise_rng) {
  if (plane < 0 || plane >= cfg.planes) {
    throw std::invalid_argument("sat_position: plane index out of range");
  }
  if (sat < 0 || sat >= cfg.sats_per_plane) {
    throw std::invalid_argument("sat_position: sat index out of range");
  }
  const double t = static_cast<double>(slot) * slot_duration_s;
  const double v = cfg.along_track_speed(plane);
  const double along = cfg.initial_offset_m + sat * cfg.sat_spacing_m() + v * t;

  SatPosition out;
  out.plane = plane;
  out.sat = sat;
  out.slot = slot;
  const double cross =
      (plane - 0.5 * (cfg.planes - 1)) * cfg.cross_track_offset_m;
  out.position = {cross, wrap_centered(along, cfg.circumference_m),
                  cfg.altitude_m};
  out.velocity = {0.0, v, 0.0};

  if (noise_rng != nullptr) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma = std::sqrt(cfg.position_noise_variance_m2);
    // Always consume three draws so streams stay aligned across sigma values.
    const double nx = gauss(*noise_rng);
    const double ny = gauss(*noise_rng);
    const double nz = gauss(*noise_rng);
    out.position += sigma * Eigen::Vector3d{nx, ny, nz};
  }
  return out;
}

int nearest_sat(const ConstellationConfig& cfg, int plane, long slot,
                double slot_duration_s) {
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.sats_per_plane; ++i) {
    const SatPosition p = sat_position(cfg, plane, i, slot, slot_duration_s);
    const double d = std::abs(p.position.y());
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

}  // namespace erach
