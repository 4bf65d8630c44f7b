// SPDX-License-Identifier: Apache-2.0

#include <qmimo/random.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace qmimo;

TEST(RandomStream, SameSeedSameSequence) {
    RandomStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, DerivedStreamsDiffer) {
    auto a = RandomStream::derive(7, StreamTag::Trial, 0);
    auto b = RandomStream::derive(7, StreamTag::Trial, 1);
    auto c = RandomStream::derive(7, StreamTag::Drop, 0);
    const auto x = a.next_u64();
    EXPECT_NE(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
}

// Golden values pin the portable transforms; std::mt19937_64 itself is
// specified bit-exactly by the standard.
TEST(RandomStream, GoldenOutput) {
    std::mt19937_64 ref(splitmix64(1));
    RandomStream s(1);
    EXPECT_EQ(s.next_u64(), ref());
    EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(RandomStream, NormalMoments) {
    RandomStream s(3);
    const int n = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = s.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(n) * 1.5);
    // var of sample variance ~ 2/n
    EXPECT_NEAR(var, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(RandomStream, UniformIntCoversRangeUniformly) {
    RandomStream s(9);
    int counts[3] = {0, 0, 0};
    const int n = 30000;
    for (int i = 0; i < n; ++i) {
        const int v = s.uniform_int(1, 3);
        ASSERT_GE(v, 1);
        ASSERT_LE(v, 3);
        ++counts[v - 1];
    }
    for (int c : counts) EXPECT_NEAR(c, n / 3.0, 4.0 * std::sqrt(n * (1.0 / 3) * (2.0 / 3)));
}
