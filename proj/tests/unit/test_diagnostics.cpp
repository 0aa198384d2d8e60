#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wbi/diagnostics.hpp"
#include "wbi/error.hpp"

using namespace wbi;

namespace {

std::vector<double> ar1(double rho, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, std::sqrt(1 - rho * rho));
  std::vector<double> x(n);
  x[0] = std::normal_distribution<double>()(rng);
  for (std::size_t i = 1; i < n; ++i) x[i] = rho * x[i - 1] + e(rng);
  return x;
}

}  // namespace

TEST(EssWeights, HandCases) {
  EXPECT_DOUBLE_EQ(ess_weights(std::vector<double>(10, 0.3)), 10.0);
  std::vector<double> one(10, 0.0);
  one[4] = 2.0;
  EXPECT_DOUBLE_EQ(ess_weights(one), 1.0);
  EXPECT_NEAR(ess_weights(std::vector<double>{1, 1, 2}), 16.0 / 6.0, 1e-15);
  EXPECT_THROW(ess_weights(std::vector<double>{0, 0}), NumericError);
}

TEST(EssWeights, AlwaysBetweenOneAndM) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> ex(1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::size_t m = 1 + rng() % 200;
    std::vector<double> w(m);
    for (double& x : w) x = std::pow(ex(rng), 1 + static_cast<double>(rng() % 8));
    double e = ess_weights(w);
    EXPECT_GE(e, 1.0 - 1e-12);
    EXPECT_LE(e, static_cast<double>(m) + 1e-9);
  }
}

TEST(EssWeights, LogSpaceIsShiftInvariant) {
  std::vector<double> lw = {-1000.0, -1000.0, -1000.0 + std::log(2.0)};
  EXPECT_NEAR(ess_log_weights(lw), 16.0 / 6.0, 1e-12);
  lw.push_back(-INFINITY);
  EXPECT_NEAR(ess_log_weights(lw), 16.0 / 6.0, 1e-12);
}

TEST(EssChain, Ar1MatchesAnalyticFactor) {
  for (double rho : {0.5, 0.9}) {
    const std::size_t n = 100000;
    double expect = (1 - rho) / (1 + rho) * static_cast<double>(n);
    double got = ess_chain(ar1(rho, n, 7));
    EXPECT_LT(std::abs(got - expect) / expect, 0.3) << rho;
  }
}

TEST(EssChain, IidNearN) {
  auto x = ar1(0.0, 20000, 2);
  EXPECT_NEAR(ess_chain(x) / 20000.0, 1.0, 0.1);
}

TEST(EssChain, EdgeCases) {
  EXPECT_THROW(ess_chain(std::vector<double>{1, 2, 3}), NumericError);
  EXPECT_EQ(ess_chain(std::vector<double>(50, 2.0)), 50.0);
  EXPECT_NEAR(ess_chains({ar1(0, 5000, 1), ar1(0, 5000, 2)}),
              ess_chain(ar1(0, 5000, 1)) + ess_chain(ar1(0, 5000, 2)), 1e-9);
}

TEST(RHat, IidChainsNearOne) {
  std::vector<std::vector<double>> chains;
  for (std::uint64_t s = 0; s < 4; ++s) chains.push_back(ar1(0.0, 10000, 100 + s));
  RHat r = r_hat(chains);
  EXPECT_FALSE(r.degenerate);
  EXPECT_GE(r.value, 0.99);
  EXPECT_LE(r.value, 1.01);
}

TEST(RHat, ConstantChainsAreDegenerate) {
  RHat r = r_hat({std::vector<double>(100, 1.5), std::vector<double>(100, 1.5)});
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 1.0);
}

TEST(RHat, SeparatedChainsAreFlagged) {
  auto a = ar1(0.0, 2000, 1), b = ar1(0.0, 2000, 2);
  for (double& x : b) x += 5.0;
  EXPECT_GT(r_hat({a, b}).value, 1.5);
}

TEST(Summaries, GeometricMeanAndQuantiles) {
  EXPECT_NEAR(geometric_mean(std::vector<double>{1, 10, 100}), 10.0, 1e-12);
  EXPECT_THROW(geometric_mean(std::vector<double>{1, 0}), Error);
  std::vector<double> xs = {4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.25), 1.75);  // position 0.75 between 1 and 2
  EXPECT_DOUBLE_EQ(quantile(xs, 0.75), 3.25);
}
