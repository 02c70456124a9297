#include <doctest.h>

#include <cmath>
#include <memory>

#include "erach/agents.hpp"

using namespace erach;

namespace {

AgentObservation dummy_obs() {
  AgentObservation obs;
  obs.episode_length = 100;
  return obs;
}

UtOutcome collided_outcome() {
  UtOutcome u;
  u.attempted = true;
  u.collided = true;
  return u;
}

}  // namespace

TEST_CASE("aloha picks planes uniformly and never backs off") {
  AlohaPolicy policy(2);
  Rng rng(3);
  const int n = 100000;
  long plane1 = 0;
  for (int i = 0; i < n; ++i) {
    const RaAction a = policy.act(dummy_obs(), rng);
    CHECK(a.attempts());
    CHECK(a.preamble == 1);
    plane1 += a.choice == 1 ? 1 : 0;
  }
  CHECK(std::abs(static_cast<double>(plane1) / n - 0.5) < 0.005);

  AlohaPolicy degenerate(1);
  for (int i = 0; i < 50; ++i) CHECK(degenerate.act(dummy_obs(), rng).choice == 1);
}

TEST_CASE("rach counts its backoff window down before re-attempting") {
  RachPolicy policy(2, 2, 10);
  Rng rng(4);
  policy.notify(collided_outcome(), rng);
  const int drawn = policy.backoff_remaining();
  CHECK(drawn >= 1);
  CHECK(drawn <= 10);
  for (int left = drawn; left > 0; --left) {
    CHECK(policy.backoff_remaining() == left);
    const RaAction a = policy.act(dummy_obs(), rng);
    CHECK_FALSE(a.attempts());
  }
  CHECK(policy.backoff_remaining() == 0);
  CHECK(policy.act(dummy_obs(), rng).attempts());
}

TEST_CASE("collision backoff draws are DU(1, W)") {
  RachPolicy policy(2, 2, 10);
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    policy.notify(collided_outcome(), rng);
    const int b = policy.backoff_remaining();
    CHECK(b >= 1);
    CHECK(b <= 10);
    sum += b;
    policy.reset(rng);
  }
  CHECK(sum / n == doctest::Approx(5.5).epsilon(0.05 / 5.5));
}

TEST_CASE("success and backoff outcomes leave the countdown alone") {
  RachPolicy policy(2, 2, 10);
  Rng rng(6);
  UtOutcome success;
  success.attempted = true;
  success.accessed = true;
  policy.notify(success, rng);
  CHECK(policy.backoff_remaining() == 0);

  UtOutcome idle;  // the agent's own backoff slot
  policy.notify(idle, rng);
  CHECK(policy.backoff_remaining() == 0);
}

TEST_CASE("rach attempt cells are jointly uniform over planes and preambles") {
  RachPolicy policy(2, 2, 10);
  Rng rng(7);
  const int n = 100000;
  long cells[2][2] = {{0, 0}, {0, 0}};
  for (int i = 0; i < n; ++i) {
    const RaAction a = policy.act(dummy_obs(), rng);
    REQUIRE(a.attempts());  // never notified of a collision here
    cells[a.choice - 1][a.preamble - 1]++;
  }
  for (int k = 0; k < 2; ++k) {
    for (int p = 0; p < 2; ++p) {
      CHECK(std::abs(static_cast<double>(cells[k][p]) / n - 0.25) < 0.01);
    }
  }
}

TEST_CASE("window of one skips exactly one opportunity") {
  RachPolicy policy(2, 2, 1);
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    policy.notify(collided_outcome(), rng);
    CHECK(policy.backoff_remaining() == 1);
    CHECK_FALSE(policy.act(dummy_obs(), rng).attempts());
    CHECK(policy.act(dummy_obs(), rng).attempts());
  }
}

TEST_CASE("rach contends less than aloha under the paper scenario") {
  // J = 5, K = 2, P = 2, W = 10 contention loop shared by both baselines.
  const int n_ut = 5;
  const long slots = 100000;
  Rng rng(9);

  auto contention = [&](bool rach) {
    std::vector<std::unique_ptr<Policy>> agents;
    for (int j = 0; j < n_ut; ++j) {
      if (rach) agents.push_back(std::make_unique<RachPolicy>(2, 2, 10));
      else agents.push_back(std::make_unique<AlohaPolicy>(2));
    }
    long attempts = 0, collisions = 0, slots_with = 0;
    for (long n = 0; n < slots; ++n) {
      std::vector<RaAction> actions;
      for (auto& agent : agents) actions.push_back(agent->act(dummy_obs(), rng));
      const SlotOutcome out = resolve_slot(actions, 2, rach ? 2 : 1);
      for (int j = 0; j < n_ut; ++j) {
        agents[static_cast<size_t>(j)]->notify(out.ut[static_cast<size_t>(j)], rng);
      }
      attempts += out.attempts();
      collisions += out.collisions();
      slots_with += n_ut;
    }
    return std::pair<double, double>{
        static_cast<double>(collisions) / static_cast<double>(attempts),
        static_cast<double>(collisions) / static_cast<double>(slots_with)};
  };

  const auto [aloha_per_attempt, aloha_per_slot] = contention(false);
  const auto [rach_per_attempt, rach_per_slot] = contention(true);

  CHECK(aloha_per_attempt == doctest::Approx(0.9375).epsilon(0.01));
  CHECK(rach_per_attempt < aloha_per_attempt);
  // The paper-comparable per-opportunity figure lands in the reported band;
  // per-attempt normalization under these backoff semantics sits near 0.32.
  CHECK(rach_per_slot > 0.08);
  CHECK(rach_per_slot < 0.25);
  CHECK(rach_per_attempt == doctest::Approx(0.316).epsilon(0.08));
}
