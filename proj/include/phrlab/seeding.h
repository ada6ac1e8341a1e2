#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace phrlab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent seed streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines a base seed with stream identifiers (worker, run, counter ...).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Uniform double in [0, 1) built from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection; independent of the standard library's distributions.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

/// Issues one seed per episode for a single environment stream.
class EpisodeSeeder {
 public:
  EpisodeSeeder() = default;
  EpisodeSeeder(std::uint64_t base, std::uint64_t stream) : base_(base), stream_(stream) {}

  std::uint64_t next() { return derive_seed(base_, {stream_, counter_++}); }
  std::uint64_t issued() const { return counter_; }

 private:
  std::uint64_t base_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace phrlab
