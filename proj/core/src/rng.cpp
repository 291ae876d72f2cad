#include "dialoforge/rng.hpp"

#include <cmath>
#include <numbers>

namespace dialoforge {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed + kGolden);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + kGolden));
  return h;
}

std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed + (index + 1) * kGolden);
}

double counter_uniform(std::uint64_t seed, std::uint64_t index) {
  return static_cast<double>(counter_u64(seed, index) >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::next_u64() { return counter_u64(seed_, counter_++); }

double CounterRng::uniform() { return counter_uniform(seed_, counter_++); }

std::uint64_t CounterRng::below(std::uint64_t n) {
  auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

double CounterRng::gaussian() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace dialoforge
