#pragma once

#include <cstdint>
#include <random>

namespace stochex {

// Purposes that get their own stream off a root seed. Adding a purpose never
// shifts the draws of another one.
enum class Stream : std::uint64_t {
  kBrownian = 1,
  kJumpTimes = 2,
  kJumpSizes = 3,
  kDriver = 16,  // kDriver + i: root seed of the i-th named driver in a bundle
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter scheme: child = splitmix64(splitmix64(seed) ^ splitmix64(counter)).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(splitmix64(seed) ^ splitmix64(counter * 0xd1b54a32d192ed03ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream s) {
  return derive_seed(seed, static_cast<std::uint64_t>(s));
}

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream s) {
  return std::mt19937_64(derive_seed(seed, s));
}

}  // namespace stochex
