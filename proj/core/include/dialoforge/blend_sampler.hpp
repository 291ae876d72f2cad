#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialoforge/rng.hpp"

namespace dialoforge {

enum class DataSource { synthetic, real };
std::string_view to_string(DataSource s);

enum class PoolSampling {
  with_replacement,  // uniform item draw per slot
  epoch_shuffle,     // walk a seeded permutation, reshuffle per epoch
};

struct BlendConfig {
  double alpha = 0.2;
  std::uint64_t seed = 0;
  std::vector<std::string> synthetic_pool;  // entry ids
  std::vector<std::string> real_pool;
  PoolSampling sampling = PoolSampling::with_replacement;

  /// Throws ConfigError: alpha outside [0,1], or an empty pool that alpha can reach.
  void validate() const;
};

struct TaggedId {
  DataSource source;
  std::string entry_id;

  bool operator==(const TaggedId&) const = default;
};

/// Source choice per training item: draw mu ~ U[0,1) and take synthetic data
/// iff mu < alpha. Source draws come from the counter stream of `seed`; item
/// draws use an independent child stream, so each next_source() consumes
/// exactly one variate of the source stream.
class BlendSampler {
 public:
  explicit BlendSampler(BlendConfig cfg);

  DataSource next_source();
  std::vector<TaggedId> sample_batch(std::size_t batch_size);

  /// Number of source variates consumed so far.
  std::uint64_t draws() const { return source_rng_.counter(); }
  const BlendConfig& config() const { return cfg_; }

 private:
  std::string pick(DataSource src);

  BlendConfig cfg_;
  CounterRng source_rng_;
  CounterRng item_rng_;
  std::vector<std::size_t> perm_[2];
  std::size_t cursor_[2] = {0, 0};
};

/// Child seed for parallel consumer `shard`.
std::uint64_t shard_seed(std::uint64_t seed, std::uint64_t shard);

}  // namespace dialoforge
