#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace erach {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to derive well-separated child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// child(master_seed, path...): every (replica, purpose, index) tuple gets its
// own stream so replicas can be re-run in isolation.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(base);
  for (auto p : path) s = mix64(s ^ mix64(p));
  return s;
}

inline Rng derive_stream(std::uint64_t base,
                         std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(base, path));
}

// Stream purpose tags.
namespace stream_tag {
inline constexpr std::uint64_t placement = 1;
inline constexpr std::uint64_t environment = 2;
inline constexpr std::uint64_t position_noise = 3;
inline constexpr std::uint64_t agent_actions = 4;
inline constexpr std::uint64_t agent_init = 5;
}  // namespace stream_tag

}  // namespace erach
