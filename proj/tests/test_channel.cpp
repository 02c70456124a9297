#include <doctest.h>

#include <cmath>

#include "erach/channel.hpp"

using namespace erach;

TEST_CASE("elevation angle spans overhead to grazing") {
  const Eigen::Vector3d ut{0, 0, 0};
  CHECK(elevation_angle_deg({0, 0, 550e3}, ut) == doctest::Approx(90.0));
  CHECK(elevation_angle_deg({0, 550e3, 550e3}, ut) == doctest::Approx(45.0));
  // half an inter-satellite spacing off to the side
  CHECK(elevation_angle_deg({0, 988.5e3, 550e3}, ut) ==
        doctest::Approx(29.09).epsilon(1e-3));
  CHECK_THROWS_AS(elevation_angle_deg(ut, ut), std::domain_error);
}

TEST_CASE("los probability hits the tabulated anchor points") {
  CHECK(los_probability(10.0, 10.0, 0.6) == doctest::Approx(1.0 / 11.0));
  CHECK(los_probability(90.0, 10.0, 0.6) > 0.999);
  // strictly increasing and inside (0, 1) wherever the logistic is resolvable
  // in double precision (it rounds to exactly 1.0 above ~75 degrees)
  double prev = 0.0;
  for (double theta = 0.0; theta <= 70.0; theta += 1.0) {
    const double phi = los_probability(theta, 10.0, 0.6);
    CHECK(phi > prev);
    CHECK(phi < 1.0);
    prev = phi;
  }
  CHECK(los_probability(90.0, 10.0, 0.6) <= 1.0);
}

TEST_CASE("large-scale gain follows the power law with NLoS attenuation") {
  LinkBudget budget;
  budget.ref_gain = 3.5;
  CHECK(large_scale_gain(1.0, true, budget) == doctest::Approx(3.5));
  const double d = 1234.5;
  CHECK(large_scale_gain(d, false, budget) / large_scale_gain(d, true, budget) ==
        doctest::Approx(0.2));
  CHECK(large_scale_gain(2.0 * d, true, budget) / large_scale_gain(d, true, budget) ==
        doctest::Approx(std::pow(2.0, -2.1)));
  CHECK_THROWS_AS(large_scale_gain(0.0, true, budget), std::domain_error);
}

TEST_CASE("expected gain equals the analytic LoS/NLoS mixture") {
  LinkBudget budget;
  budget.ref_gain = 7.25e11;
  for (double d : {550e3, 700e3, 1.1e6}) {
    for (double theta : {5.0, 10.0, 29.09, 60.0, 89.0}) {
      const double phi = los_probability(theta, budget.los_l1, budget.los_l2);
      const double mixture = phi * large_scale_gain(d, true, budget) +
                             (1.0 - phi) * large_scale_gain(d, false, budget);
      CHECK(expected_gain(d, theta, budget) == doctest::Approx(mixture).epsilon(1e-12));
    }
  }
  // theta = L1 makes the mixture weight exactly 1/11 + 0.2 * 10/11
  const double g = expected_gain(1.0, 10.0, budget);
  CHECK(g == doctest::Approx((1.0 / 11.0 + 0.2 * 10.0 / 11.0) * budget.ref_gain));
}

TEST_CASE("sampled channel is deterministic without small-scale fading") {
  LinkBudget budget;
  budget.small_scale = LinkBudget::SmallScale::none;
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const ChannelDraw draw = sample_channel(700e3, 40.0, budget, rng);
    CHECK(draw.gain == large_scale_gain(700e3, draw.is_los, budget));
  }
}

TEST_CASE("Monte-Carlo channel mean matches the expected gain") {
  LinkBudget budget;
  budget.ref_gain = 1.0;
  Rng rng(2024);
  const double d = 650e3;
  const double theta = 20.0;  // phi ~ 0.71, both branches exercised
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  long los_count = 0;
  for (int i = 0; i < n; ++i) {
    const ChannelDraw draw = sample_channel(d, theta, budget, rng);
    sum += draw.gain;
    sum_sq += draw.gain * draw.gain;
    los_count += draw.is_los ? 1 : 0;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  CHECK(std::abs(mean - expected_gain(d, theta, budget)) < 3.0 * se);

  const double phi = los_probability(theta, budget.los_l1, budget.los_l2);
  CHECK(std::abs(static_cast<double>(los_count) / n - phi) < 0.005);
}

TEST_CASE("slot throughput closed form and monotonicity") {
  LinkBudget budget;  // B = 1e8, unit SNR scale
  const double snr = 3.7;
  const double gains[] = {snr};
  CHECK(slot_throughput_bits(gains, budget, 0.090) ==
        doctest::Approx(0.09 * 1e8 * std::log2(1.0 + snr)));

  // eta = 0: no gains sampled, zero bits
  CHECK(slot_throughput_bits({}, budget, 0.090) == 0.0);

  // monotone in transmit power and in the gain
  LinkBudget strong = budget;
  strong.tx_power_w = 2.0;
  CHECK(slot_throughput_bits(gains, strong, 0.090) >
        slot_throughput_bits(gains, budget, 0.090));
  const double bigger[] = {snr * 1.5};
  CHECK(slot_throughput_bits(bigger, budget, 0.090) >
        slot_throughput_bits(gains, budget, 0.090));

  // sub-slot gains each cover an equal share of the data phase
  const double split[] = {snr, snr, snr};
  CHECK(slot_throughput_bits(split, budget, 0.090) ==
        doctest::Approx(slot_throughput_bits(gains, budget, 0.090)));
}

TEST_CASE("link budget invariants") {
  LinkBudget budget;
  budget.nlos_attenuation = 0.0;
  CHECK_THROWS_AS(budget.validate(), std::invalid_argument);
  budget = LinkBudget{};
  budget.pathloss_exponent = -2.0;
  CHECK_THROWS_AS(budget.validate(), std::invalid_argument);
  CHECK_NOTHROW(LinkBudget{}.validate());
}
