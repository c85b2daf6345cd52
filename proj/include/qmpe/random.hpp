#pragma once

// Counter-based substreams: sample i of a run with seed s always draws from the
// same generator state, whatever the thread layout.

#include <cmath>
#include <cstdint>
#include <random>

#include "qmpe/linalg.hpp"

namespace qmpe {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(substream_seed(seed, index));
}

// Normalized vector of iid standard complex Gaussians.
inline CVector haar_pure_state(std::size_t d, std::mt19937_64& rng) {
  if (d < 1) throw DimensionError("haar_pure_state: d must be >= 1");
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(static_cast<Eigen::Index>(d));
  for (;;) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double re = g(rng);
      v(i) = cdouble(re, g(rng));
    }
    const double n = v.norm();
    if (n > 1e-150) return v / n;
  }
}

inline CVector haar_pure_state(std::size_t d, std::uint64_t seed, std::uint64_t index = 0) {
  auto rng = substream(seed, index);
  return haar_pure_state(d, rng);
}

}  // namespace qmpe
