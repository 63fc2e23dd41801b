#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rsmdp/entropy.hpp"

using namespace rsmdp;

TEST(RelativeEntropy, KnownValues) {
  const std::vector<double> u{0.5, 0.5};
  EXPECT_EQ(relative_entropy(u, u), 0.0);
  EXPECT_NEAR(relative_entropy(std::vector<double>{1.0, 0.0}, u), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isinf(relative_entropy(u, std::vector<double>{1.0, 0.0})));
  // 0 log 0 = 0 where mu vanishes.
  EXPECT_NEAR(relative_entropy(std::vector<double>{0.0, 1.0}, std::vector<double>{0.25, 0.75}),
              -std::log(0.75), 1e-15);
  EXPECT_THROW(relative_entropy(u, std::vector<double>{1.0}), DomainError);
}

TEST(RelativeEntropy, NonnegativeOnRandomPairs) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto mu = oracle::random_simplex(rng, 6, 0.2);
    const auto nu = oracle::random_simplex(rng, 6, 0.2);
    EXPECT_GE(relative_entropy(mu, nu), 0.0);
  }
}

TEST(LogMgf, TrivialCases) {
  const std::vector<double> nu{0.2, 0.3, 0.5};
  EXPECT_NEAR(log_mgf(std::vector<double>{4.0, 4.0, 4.0}, nu), 4.0, 1e-15);
  EXPECT_EQ(log_mgf(std::vector<double>{7.0, -3.0, 1e9}, std::vector<double>{1.0, 0.0, 0.0}), 7.0);
  EXPECT_THROW(log_mgf(std::vector<double>{1.0}, std::vector<double>{0.0}), DomainError);
}

TEST(LogMgf, NoOverflowForLargeArguments) {
  const std::vector<double> nu{0.5, 0.5};
  EXPECT_NEAR(log_mgf(std::vector<double>{1e4, 0.0}, nu), 1e4 + std::log(0.5), 1e-9);
  EXPECT_NEAR(log_mgf(std::vector<double>{-1e4, -1e4}, nu), -1e4, 1e-9);
}

TEST(LogMgf, MatchesNaiveFormulaOnModerateInputs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> h(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const auto nu = oracle::random_simplex(rng, 5, 0.2);
    std::vector<double> v(5);
    for (auto& e : v) e = h(rng);
    double naive = 0.0;
    for (std::size_t y = 0; y < 5; ++y) naive += nu[y] * std::exp(v[y]);
    EXPECT_NEAR(log_mgf(v, nu), std::log(naive), 1e-12);
    const auto parts = log_mgf_parts(v, nu);
    EXPECT_DOUBLE_EQ(parts.value(), log_mgf(v, nu));
  }
}

TEST(Tilt, ShapeAndZeroTilt) {
  const std::vector<double> nu{0.1, 0.0, 0.9};
  EXPECT_EQ(tilt(std::vector<double>{0.0, 0.0, 0.0}, nu), nu);
  const auto mu = tilt(std::vector<double>{std::log(9.0), 5.0, 0.0}, nu);
  EXPECT_NEAR(mu[0], 0.5, 1e-15);
  EXPECT_EQ(mu[1], 0.0);
  EXPECT_NEAR(mu[2], 0.5, 1e-15);
}

TEST(VariationalGap, ZeroAtTiltPositiveElsewhere) {
  const std::vector<double> nu{0.25, 0.25, 0.5};
  const std::vector<double> h{1.0, -2.0, 0.5};
  EXPECT_NEAR(variational_gap(tilt(h, nu), h, nu), 0.0, 1e-14);
  EXPECT_GT(variational_gap(nu, h, nu), 1e-3);
  EXPECT_TRUE(std::isinf(
      variational_gap(std::vector<double>{0.0, 1.0, 0.0}, h, std::vector<double>{0.5, 0.0, 0.5})));
}

TEST(VariationalGap, TiltIsTheUniqueMaximizerOnAGrid) {
  // Exhaustive 2-simplex grid with step 1/200; the best grid point is the one
  // nearest the tilt and every gap is nonnegative.
  const std::vector<double> nu{0.2, 0.3, 0.5};
  const std::vector<double> h{0.3, -1.0, 1.2};
  const auto mu0 = tilt(h, nu);
  double best = 1e300;
  std::vector<double> arg;
  const int steps = 200;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j) {
      const std::vector<double> mu{i / double(steps), j / double(steps),
                                   (steps - i - j) / double(steps)};
      const double gap = variational_gap(mu, h, nu);
      EXPECT_GE(gap, -1e-12);
      if (gap < best) {
        best = gap;
        arg = mu;
      }
    }
  for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(arg[y], mu0[y], 1.0 / steps);
}
