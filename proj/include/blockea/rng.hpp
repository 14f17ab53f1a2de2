#pragma once

#include "blockea/common.hpp"

#include <cstdint>
#include <random>

namespace blockea {

// Streams are keyed by (seed, replicate, draw) so that a draw's randomness
// does not depend on scheduling: parallel and serial runs produce identical
// numbers.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t replicate,
                             std::uint64_t draw) {
  return splitmix64(splitmix64(splitmix64(seed) + replicate) + draw);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t replicate,
                                   std::uint64_t draw) {
  return std::mt19937_64(mix_key(seed, replicate, draw));
}

inline Vector standard_normal_vector(std::mt19937_64& gen, int size) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(size);
  for (int i = 0; i < size; ++i) v[i] = normal(gen);
  return v;
}

}  // namespace blockea
