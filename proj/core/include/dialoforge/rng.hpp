#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace dialoforge {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over bytes; stable across platforms (unlike std::hash).
std::uint64_t hash_string(std::string_view s);

/// Deterministically combines a seed with a list of integers into a child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Counter-based generator. Draw i (0-based) is
///
///   mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)
///
/// which is exactly the i-th output of SplitMix64 started from `seed`.
/// Uniform doubles take the top 53 bits: (u64 >> 11) * 2^-53, so they lie in [0, 1).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double gaussian();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// Stateless access to draw `index` of the stream for `seed`.
std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t index);
double counter_uniform(std::uint64_t seed, std::uint64_t index);

}  // namespace dialoforge
