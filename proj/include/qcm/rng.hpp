// Counter-based uniform random numbers: every draw is a pure function of
// (seed, stream, event), so results do not depend on execution order or
// thread scheduling.
#pragma once

#include <cstdint>

namespace qcm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Strictly inside (0,1): (mantissa + 1/2) / 2^53, so neither endpoint occurs.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t event) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ event);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
}

}  // namespace qcm
