#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "causal/exogenous.hpp"

using namespace causal;
using namespace causal::exogenous;

namespace {

// Digits of 0.123456789101112...
std::string champernowne(std::size_t n) {
  std::string s;
  for (int k = 1; s.size() < n; ++k) s += std::to_string(k);
  return s;
}

DigitStream champernowne_source() {
  static const std::string digits = champernowne(100000);
  return DigitStream([](std::uint64_t pos) { return digits.at(pos - 1) - '0'; }, 10);
}

std::vector<std::uint64_t> positions(std::uint64_t row, std::size_t n) {
  std::vector<std::uint64_t> out;
  UniformStream s(std::make_shared<const DigitStream>(), row, 1);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(s.next_position());
    s.next_uniform();
  }
  return out;
}

}  // namespace

TEST(Exogenous, DiagonalRowsMatchTheTriangularArray) {
  EXPECT_EQ(positions(1, 7), (std::vector<std::uint64_t>{1, 3, 6, 10, 15, 21, 28}));
  EXPECT_EQ(positions(2, 6), (std::vector<std::uint64_t>{2, 5, 9, 14, 20, 27}));
  EXPECT_EQ(positions(3, 5), (std::vector<std::uint64_t>{4, 8, 13, 19, 26}));
}

TEST(Exogenous, DiagonalPositionsAreDisjointAndExhaustive) {
  // Every position up to the limit is hit exactly once by the rows.
  const std::uint64_t limit = 10000;
  std::set<std::uint64_t> seen;
  for (std::uint64_t row = 1; row <= 200; ++row)
    for (std::uint64_t col = 1;; ++col) {
      auto p = diagonal_position(row, col);
      if (p > limit) break;
      EXPECT_TRUE(seen.insert(p).second) << "position " << p << " reused";
    }
  EXPECT_EQ(seen.size(), limit);
}

TEST(Exogenous, ChampernowneDrawsWithThreeDigits) {
  auto src = std::make_shared<const DigitStream>(champernowne_source());
  auto streams = split_streams(src, 3, 3);
  EXPECT_NEAR(streams[0].next_uniform(), 0.136, 1e-12);
  EXPECT_NEAR(streams[1].next_uniform(), 0.259, 1e-12);
  EXPECT_NEAR(streams[2].next_uniform(), 0.481, 1e-12);
}

TEST(Exogenous, SingleStreamUsesRowOne) {
  auto streams = split_streams(DigitStream(5), 1);
  ASSERT_EQ(streams.size(), 1u);
  EXPECT_EQ(streams[0].row(), 1u);
  EXPECT_EQ(streams[0].next_position(), 1u);
}

TEST(Exogenous, ZeroStreamsIsInvalid) {
  try {
    split_streams(DigitStream(1), 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
  }
}

TEST(Exogenous, DigitsAreAPureFunctionOfPosition) {
  DigitStream a(42), b(42), c(43);
  int differ = 0;
  for (std::uint64_t p = 1; p <= 1000; ++p) {
    EXPECT_EQ(a.digit(p), b.digit(p));
    EXPECT_GE(a.digit(p), 0);
    EXPECT_LT(a.digit(p), 10);
    differ += a.digit(p) != c.digit(p);
  }
  EXPECT_GT(differ, 800);
  DigitStream bin(7, 2);
  for (std::uint64_t p = 1; p <= 100; ++p) EXPECT_LT(bin.digit(p), 2);
}

TEST(Exogenous, AllZeroSourceGivesZero) {
  auto src = std::make_shared<const DigitStream>([](std::uint64_t) { return 0; }, 10);
  UniformStream s(src, 4);
  EXPECT_EQ(s.next_uniform(), 0.0);
}

TEST(Exogenous, SuccessiveDrawsUseIncreasingPositions) {
  UniformStream s(std::make_shared<const DigitStream>(3), 2, 16);
  auto before = s.next_position();
  s.next_uniform();
  auto after = s.next_position();
  EXPECT_GT(after, before);
  EXPECT_EQ(s.consumed(), 16u);
}

TEST(Exogenous, MeanOfSeededDrawsIsOneHalf) {
  UniformStream s(std::make_shared<const DigitStream>(2024), 1);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = s.next_uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Exogenous, InverseCdfExamples) {
  auto bern = cdf_from_masses<int>({0, 1}, {0.7, 0.3});
  EXPECT_EQ(inverse_cdf_sample(bern, 0.5), 0);
  EXPECT_EQ(inverse_cdf_sample(bern, 0.8), 1);
  std::vector<CdfPoint<int>> point{{7, 1.0}};
  for (double u : {0.0, 0.3, 0.999}) EXPECT_EQ(inverse_cdf_sample(point, u), 7);
  auto unif = cdf_from_masses<int>({0, 1, 2}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  EXPECT_EQ(inverse_cdf_sample(unif, 0.34), 1);
}

TEST(Exogenous, MalformedCdfIsRejected) {
  std::vector<CdfPoint<int>> bad{{0, 0.6}, {1, 0.4}, {2, 1.0}};
  EXPECT_THROW(inverse_cdf_sample(bad, 0.5), Error);
  std::vector<CdfPoint<int>> short_cdf{{0, 0.6}};
  EXPECT_THROW(inverse_cdf_sample(short_cdf, 0.5), Error);
}

TEST(Exogenous, InverseCdfFrequenciesMatchMasses) {
  const std::vector<double> masses{0.1, 0.25, 0.4, 0.25};
  auto cdf = cdf_from_masses<int>({0, 1, 2, 3}, masses);
  UniformStream s(std::make_shared<const DigitStream>(99), 3);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[inverse_cdf_sample(cdf, s.next_uniform())];
  for (int k = 0; k < 4; ++k) {
    double se = std::sqrt(masses[k] * (1 - masses[k]) / n);
    EXPECT_NEAR(counts[k] / double(n), masses[k], 3 * se) << "atom " << k;
  }
}

TEST(Exogenous, NormalQuantileIsSymmetric) {
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-9);
  EXPECT_NEAR(normal_quantile(0.025, 1.0, 4.0), 1.0 - 2 * 1.959963984540054, 1e-9);
}
