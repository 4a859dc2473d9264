#pragma once

#include <cstdint>

namespace ppw::rng {

// Counter-based generator: every draw is a pure function of
// (seed, purpose, frame, counter). No state, no call-order dependence, and
// identical output on every platform, which std::normal_distribution does
// not guarantee. Quality is plenty for jitter and latency sampling.

// splitmix64 finalizer.
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

enum Purpose : std::uint64_t {
  kLatency = 1,
  kJitter = 2,
  kDrop = 3,
  kScore = 4,
};

inline std::uint64_t draw(std::uint64_t seed, std::uint64_t purpose,
                          std::uint64_t frame, std::uint64_t counter) {
  std::uint64_t h = mix(seed ^ 0x243f6a8885a308d3ull);
  h = mix(h ^ purpose);
  h = mix(h ^ frame);
  h = mix(h ^ counter);
  return h;
}

// [0, 1)
inline double uniform01(std::uint64_t seed, std::uint64_t purpose,
                        std::uint64_t frame, std::uint64_t counter) {
  return static_cast<double>(draw(seed, purpose, frame, counter) >> 11) *
         0x1.0p-53;
}

// Standard normal via Box-Muller; consumes counters 2c and 2c+1.
double gaussian(std::uint64_t seed, std::uint64_t purpose, std::uint64_t frame,
                std::uint64_t counter);

}  // namespace ppw::rng
