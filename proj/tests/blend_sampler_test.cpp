#include <gtest/gtest.h>

#include <cmath>

#include "dialoforge/blend_sampler.hpp"
#include "dialoforge/errors.hpp"
#include "dialoforge/rng.hpp"

using namespace dialoforge;

namespace {

BlendConfig pools(double alpha, std::uint64_t seed) {
  BlendConfig c;
  c.alpha = alpha;
  c.seed = seed;
  c.synthetic_pool = {"s1", "s2", "s3"};
  c.real_pool = {"r1", "r2"};
  return c;
}

double synthetic_fraction(double alpha, std::uint64_t seed, std::uint64_t n) {
  BlendSampler s(pools(alpha, seed));
  std::uint64_t k = 0;
  for (std::uint64_t i = 0; i < n; ++i) k += s.next_source() == DataSource::synthetic;
  return static_cast<double>(k) / static_cast<double>(n);
}

}  // namespace

TEST(CounterRng, MatchesSplitMix64Reference) {
  // First outputs of SplitMix64 seeded with 0 (published reference values).
  CounterRng r(0);
  EXPECT_EQ(r.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(r.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(r.next_u64(), 0x06C45D188009454FULL);
  EXPECT_EQ(counter_u64(0, 1), 0x6E789E6AA1B965F4ULL);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Blend, AlphaZeroIsAlwaysReal) {
  BlendSampler s(pools(0.0, 3));
  for (int i = 0; i < 100000; ++i) ASSERT_EQ(s.next_source(), DataSource::real);
}

TEST(Blend, AlphaOneIsAlwaysSynthetic) {
  BlendSampler s(pools(1.0, 3));
  for (int i = 0; i < 100000; ++i) ASSERT_EQ(s.next_source(), DataSource::synthetic);
}

TEST(Blend, FractionWithinFourSigma) {
  const double f = synthetic_fraction(0.2, 7, 1000000);
  EXPECT_GE(f, 0.198);
  EXPECT_LE(f, 0.202);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double g = synthetic_fraction(0.2, seed, 10000);
    EXPECT_LE(std::abs(g - 0.2), 4 * std::sqrt(0.2 * 0.8 / 10000)) << seed;
  }
}

TEST(Blend, BatchOf48) {
  BlendSampler s(pools(0.2, 1));
  const auto b = s.sample_batch(48);
  ASSERT_EQ(b.size(), 48u);
  for (const auto& t : b) {
    const auto& pool = t.source == DataSource::synthetic ? pools(0, 0).synthetic_pool : pools(0, 0).real_pool;
    EXPECT_NE(std::find(pool.begin(), pool.end(), t.entry_id), pool.end());
  }
}

TEST(Blend, SameSeedSameBatches) {
  BlendSampler a(pools(0.3, 9)), b(pools(0.3, 9));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.sample_batch(16), b.sample_batch(16));
  BlendSampler c(pools(0.3, 10));
  BlendSampler d(pools(0.3, 9));
  EXPECT_NE(c.sample_batch(64), d.sample_batch(64));
}

TEST(Blend, EmptyReachablePoolIsConfigError) {
  auto c = pools(0.5, 0);
  c.real_pool.clear();
  EXPECT_THROW(BlendSampler{c}, ConfigError);
  c.alpha = 1.0;
  EXPECT_NO_THROW(BlendSampler{c});
  c.alpha = 1.5;
  EXPECT_THROW(BlendSampler{c}, ConfigError);
}

TEST(Blend, EachSourceDrawConsumesOneVariate) {
  BlendSampler s(pools(0.2, 5));
  for (int i = 0; i < 10; ++i) s.next_source();
  EXPECT_EQ(s.draws(), 10u);
  s.sample_batch(7);
  EXPECT_EQ(s.draws(), 17u);
  // source i is exactly the rule mu_i < alpha on the documented stream
  BlendSampler t(pools(0.2, 5));
  for (std::uint64_t i = 0; i < 1000; ++i)
    EXPECT_EQ(t.next_source() == DataSource::synthetic, counter_uniform(5, i) < 0.2) << i;
}

TEST(Blend, SourceSequenceIndependentOfPoolSampling) {
  auto a = pools(0.4, 2), b = pools(0.4, 2);
  b.sampling = PoolSampling::epoch_shuffle;
  BlendSampler sa(a), sb(b);
  const auto ba = sa.sample_batch(200), bb = sb.sample_batch(200);
  for (std::size_t i = 0; i < ba.size(); ++i) EXPECT_EQ(ba[i].source, bb[i].source);
}

TEST(Blend, EpochShuffleVisitsEveryItemPerEpoch) {
  auto c = pools(1.0, 4);
  c.sampling = PoolSampling::epoch_shuffle;
  BlendSampler s(c);
  for (int epoch = 0; epoch < 5; ++epoch) {
    std::multiset<std::string> seen;
    for (const auto& t : s.sample_batch(3)) seen.insert(t.entry_id);
    EXPECT_EQ(seen, (std::multiset<std::string>{"s1", "s2", "s3"}));
  }
}

TEST(Blend, ShardSeedsDiffer) {
  EXPECT_NE(shard_seed(1, 0), shard_seed(1, 1));
  EXPECT_EQ(shard_seed(1, 3), shard_seed(1, 3));
}
