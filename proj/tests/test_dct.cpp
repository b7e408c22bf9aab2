#include "masstest/dct.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace masstest;

namespace {

std::vector<double> random_block(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(n);
  for (auto& x : a) x = u(rng);
  return a;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST(Dct2, ConstantBlockIsDcOnly) {
  const auto b = dct2(std::vector<double>(4, 3.0), 2, 2);
  EXPECT_NEAR(b(0, 0), 6.0, 1e-12);
  EXPECT_NEAR(b(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(b(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(b(1, 1), 0.0, 1e-12);
}

TEST(Dct2, BasisFunctionMapsToUnitCoefficient) {
  DctCoeffs unit{4, 4, std::vector<double>(16, 0.0)};
  unit.values[1 * 4 + 0] = 1.0;
  const auto a = idct2(unit);
  const auto b = dct2(a, 4, 4);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(b.values[i], i == 4 ? 1.0 : 0.0, 1e-12);
}

TEST(Dct2, MatchesDoubleSumOracle) {
  std::mt19937_64 rng(7);
  const auto a = random_block(rng, 25);
  const auto b = dct2(a, 5, 5);
  EXPECT_LT(max_abs_diff(b.values, oracle::dct2_sum(a, 5, 5)), 1e-12);
}

TEST(Dct2, RoundTripAndParseval) {
  std::mt19937_64 rng(11);
  const auto a = random_block(rng, 63);
  const auto b = dct2(a, 7, 9);
  EXPECT_LT(max_abs_diff(idct2(b), a), 1e-9);
  double ea = 0.0, eb = 0.0;
  for (double x : a) ea += x * x;
  for (double x : b.values) eb += x * x;
  EXPECT_NEAR(ea, eb, 1e-9 * ea);
}

TEST(Dct2, Linearity) {
  std::mt19937_64 rng(3);
  const auto a = random_block(rng, 30), c = random_block(rng, 30);
  std::vector<double> mix(30);
  for (std::size_t i = 0; i < 30; ++i) mix[i] = 2.5 * a[i] - 0.75 * c[i];
  const auto ba = dct2(a, 5, 6), bc = dct2(c, 5, 6), bm = dct2(mix, 5, 6);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(bm.values[i], 2.5 * ba.values[i] - 0.75 * bc.values[i], 1e-10);
}

TEST(Dct2, InverseOfZeroAndDc) {
  const auto z = idct2({3, 4, std::vector<double>(12, 0.0)});
  for (double x : z) EXPECT_EQ(x, 0.0);
  DctCoeffs dc{3, 4, std::vector<double>(12, 0.0)};
  dc.values[0] = std::sqrt(12.0) * 1.5;
  for (double x : idct2(dc)) EXPECT_NEAR(x, 1.5, 1e-12);
}

TEST(Dct2, RejectsEmptyAndMismatchedInput) {
  EXPECT_THROW(dct2({}, 0, 0), std::invalid_argument);
  EXPECT_THROW(dct2(std::vector<double>(5, 0.0), 2, 3), std::invalid_argument);
  EXPECT_THROW(dct1({}), std::invalid_argument);
}

TEST(Dct1, ExamplesAndColumnSpecialisation) {
  const auto c = dct1(std::vector<double>(4, 2.0));
  EXPECT_NEAR(c.values[0], 4.0, 1e-12);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(c.values[i], 0.0, 1e-12);
  EXPECT_NEAR(dct1(std::vector<double>{0.3}).values[0], 0.3, 1e-15);

  std::mt19937_64 rng(5);
  const auto x = random_block(rng, 8);
  const auto one = dct1(x);
  const auto two = dct2(x, 8, 1);
  EXPECT_LT(max_abs_diff(one.values, two.values), 1e-12);
  EXPECT_LT(max_abs_diff(one.values, oracle::dct2_sum(x, 8, 1)), 1e-12);
}

TEST(ZonalMask, LengthAndOrder) {
  std::vector<double> a(45 * 60);
  std::mt19937_64 rng(1);
  for (auto& x : a) x = std::uniform_real_distribution<double>(0, 1)(rng);
  const auto b = dct2(a, 45, 60);
  EXPECT_EQ(zonal_mask(b, {5, 5}).size(), 25u);
  EXPECT_EQ(zonal_mask(b, {45, 60}).size(), 45u * 60u);
  const auto f = zonal_mask(b, {3, 7});
  ASSERT_EQ(f.size(), 21u);
  EXPECT_EQ(f[0], b(0, 0));
  EXPECT_EQ(f[6], b(0, 6));
  EXPECT_EQ(f[7], b(1, 0));
  EXPECT_EQ(f[20], b(2, 6));
  EXPECT_THROW(zonal_mask(b, {46, 1}), std::invalid_argument);
  EXPECT_THROW(zonal_mask(b, {0, 1}), std::invalid_argument);
}

TEST(ZonalMask, FastPathsAgreeWithFullTransform) {
  std::mt19937_64 rng(9);
  const auto a = random_block(rng, 12 * 20);
  const DctBasis rows(12), cols(20);
  std::vector<double> fast(25);
  dct2_zonal(a, rows, cols, {5, 5}, fast);
  EXPECT_LT(max_abs_diff(fast, zonal_mask(dct2(a, 12, 20), {5, 5})), 1e-12);

  std::vector<double> x(a.begin(), a.begin() + 20), fast1(5);
  dct1_zonal(x, cols, 5, fast1);
  const auto full = dct1(x);
  EXPECT_LT(max_abs_diff(fast1, {full.values.begin(), full.values.begin() + 5}), 1e-12);
}

TEST(ZonalMask, CommutesWithScaling) {
  std::mt19937_64 rng(2);
  auto a = random_block(rng, 36);
  const auto f1 = zonal_mask(dct2(a, 6, 6), {3, 3});
  for (auto& x : a) x *= -4.0;
  const auto f2 = zonal_mask(dct2(a, 6, 6), {3, 3});
  for (std::size_t i = 0; i < f1.size(); ++i) EXPECT_NEAR(f2[i], -4.0 * f1[i], 1e-12);
}
