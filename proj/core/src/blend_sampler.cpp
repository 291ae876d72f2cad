#include "dialoforge/blend_sampler.hpp"

#include <numeric>

#include "dialoforge/errors.hpp"

namespace dialoforge {

std::string_view to_string(DataSource s) { return s == DataSource::synthetic ? "synthetic" : "real"; }

void BlendConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (alpha > 0.0 && synthetic_pool.empty()) throw ConfigError("synthetic pool is empty but alpha > 0");
  if (alpha < 1.0 && real_pool.empty()) throw ConfigError("real pool is empty but alpha < 1");
}

BlendSampler::BlendSampler(BlendConfig cfg)
    : cfg_(std::move(cfg)), source_rng_(cfg_.seed), item_rng_(derive_seed(cfg_.seed, {0x17E4})) {
  cfg_.validate();
}

DataSource BlendSampler::next_source() {
  const double mu = source_rng_.uniform();
  return mu < cfg_.alpha ? DataSource::synthetic : DataSource::real;
}

std::string BlendSampler::pick(DataSource src) {
  const auto& pool = src == DataSource::synthetic ? cfg_.synthetic_pool : cfg_.real_pool;
  if (pool.empty()) throw ConfigError(std::string(to_string(src)) + " pool is empty");
  if (cfg_.sampling == PoolSampling::with_replacement) return pool[item_rng_.below(pool.size())];

  const int k = src == DataSource::synthetic ? 0 : 1;
  auto& perm = perm_[k];
  auto& cursor = cursor_[k];
  if (perm.size() != pool.size() || cursor >= perm.size()) {
    perm.resize(pool.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[item_rng_.below(i)]);
    cursor = 0;
  }
  return pool[perm[cursor++]];
}

std::vector<TaggedId> BlendSampler::sample_batch(std::size_t batch_size) {
  if (batch_size < 1) throw ContractError("sample_batch: batch_size must be >= 1");
  cfg_.validate();
  std::vector<TaggedId> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto src = next_source();
    out.push_back({src, pick(src)});
  }
  return out;
}

std::uint64_t shard_seed(std::uint64_t seed, std::uint64_t shard) { return derive_seed(seed, {0x5A4D, shard}); }

}  // namespace dialoforge
