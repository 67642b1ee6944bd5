#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "lrrl/rng.hpp"

using lrrl::Rng;
using lrrl::StreamPurpose;

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(Rng, ChildDependsOnlyOnSeedAndKey) {
  Rng parent(7);
  const Rng before = parent.child(3);
  for (int i = 0; i < 50; ++i) parent.next_u64();
  Rng after = parent.child(3);
  Rng copy = before;
  for (int i = 0; i < 100; ++i) ASSERT_EQ(copy.next_u64(), after.next_u64());
}

TEST(Rng, ChildKeysGiveDistinctStreams) {
  const Rng parent(11);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t k = 0; k < 64; ++k) firsts.insert(parent.child(k).next_u64());
  EXPECT_EQ(firsts.size(), 64u);
  EXPECT_NE(parent.child(StreamPurpose::arms).seed(), parent.child(StreamPurpose::noise).seed());
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(5);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Mean 1/2, sd of the mean sqrt(1/12/n) ~ 6.5e-4.
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng r(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  // Each count ~ Binomial(n, 1/7): sd ~ 92.
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n * (1.0 / 7) * (6.0 / 7)));
  EXPECT_EQ(r.uniform_index(1), 0u);
  EXPECT_EQ(r.uniform_index(0), 0u);
}

TEST(Rng, NormalMomentsMatchStandardGaussian) {
  Rng r(13);
  const int n = 400000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(Rng, GaussianMatrixFillsColumnMajor) {
  Rng a(21), b(21);
  const auto m = a.gaussian_matrix(3, 4);
  for (Eigen::Index j = 0; j < 4; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(m(i, j), b.normal());
}

TEST(Rng, SatisfiesUniformRandomBitGenerator) {
  static_assert(std::uniform_random_bit_generator<Rng>);
  Rng r(0);
  EXPECT_EQ(Rng::min(), 0u);
  EXPECT_EQ(Rng::max(), UINT64_MAX);
  (void)r();
}
