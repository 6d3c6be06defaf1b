#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>

#include "cohmoment/schur.hpp"
#include "cohmoment/thresholds.hpp"
#include "oracles.hpp"

using namespace cohmoment;

namespace {

// Q_n of the aligned pure state sqrt(lambda) as the full 2n-fold index sum,
// E[e^{i sum_a c_a delta_a}] = exp(-sigma^2/2 sum_a c_a^2).
double brute_force_g(const std::vector<double>& lam, double sigma, int n) {
  const int d = static_cast<int>(lam.size());
  std::vector<int> idx(static_cast<std::size_t>(2 * n), 0);
  double total = 0.0;
  while (true) {
    std::vector<int> c(static_cast<std::size_t>(d), 0);
    double amp = 1.0;
    for (int t = 0; t < 2 * n; ++t) {
      amp *= std::sqrt(lam[idx[t]]);
      c[idx[t]] += t < n ? 1 : -1;
    }
    double q = 0.0;
    for (int x : c) q += static_cast<double>(x) * x;
    total += amp * std::exp(-0.5 * sigma * sigma * q);
    int t = 0;
    while (t < 2 * n && ++idx[t] == d) idx[t++] = 0;
    if (t == 2 * n) break;
  }
  return total;
}

}  // namespace

TEST(Simplex, Validation) {
  EXPECT_THROW(SimplexVector({}), std::invalid_argument);
  EXPECT_THROW(SimplexVector({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(SimplexVector({1.5, -0.5}), std::invalid_argument);
  Rng rng(3);
  const SimplexVector s = SimplexVector::random(6, rng, 4);
  EXPECT_EQ(s[4], 0.0);
  EXPECT_EQ(s[5], 0.0);
  EXPECT_GT(s[0], 0.0);
}

TEST(GAB, Examples) {
  for (int k = 2; k <= 6; ++k) {
    const SimplexVector u = SimplexVector::uniform(k, 7);
    EXPECT_NEAR(g_ab(u, 2, 0), (k - 1.0) / k, 1e-13);
    EXPECT_NEAR(g_ab(u, 0, 2), k - 1.0, 1e-12);
  }
  EXPECT_EQ(g_ab(SimplexVector::uniform(3, 6), 0, 4), 0.0);
}

TEST(GN, Examples) {
  for (int k = 1; k <= 7; ++k) {
    EXPECT_NEAR(g_n(SimplexVector::uniform(k, 7), 0.0, 2), static_cast<double>(k * k), 1e-10);
    for (double s : {0.0, 0.3, 1.0, 2.0}) {
      EXPECT_NEAR(g_n(SimplexVector::uniform(k, 7), s, 3), threshold(3, k, s), 1e-10);
      EXPECT_NEAR(g_n(SimplexVector::uniform(k, 7), s, 2), threshold(2, k, s), 1e-10);
    }
  }
  for (double s : {0.0, 1.0, 5.0})
    for (int n : {2, 3}) EXPECT_NEAR(g_n(SimplexVector({1.0, 0.0, 0.0}), s, n), 1.0, 1e-14);
  EXPECT_THROW(g_n(SimplexVector::uniform(2, 3), 1.0, 4), std::invalid_argument);
}

TEST(GN, MatchesBruteForceIndexSum) {
  Rng rng(11);
  for (int t = 0; t < 30; ++t) {
    const int d = 2 + t % 4;
    const SimplexVector lam = SimplexVector::random(d, rng);
    for (double s : {0.0, 0.4, 1.3})
      for (int n : {2, 3}) {
        if (n == 3 && d == 5) continue;
        ASSERT_NEAR(g_n(lam, s, n), brute_force_g(lam.weights(), s, n), 1e-10) << d << ' ' << s << ' ' << n;
      }
  }
  const SimplexVector lam({0.1, 0.2, 0.3, 0.15, 0.25});
  EXPECT_NEAR(g_n(lam, 0.7, 2), brute_force_g(lam.weights(), 0.7, 2), 1e-10);
}

TEST(GN, EqualsQuadratureOfAlignedState) {
  const SimplexVector lam({0.5, 0.3, 0.2});
  const std::vector<double> ph{0.4, -1.1, 2.0};
  const DensityMatrix rho = DensityMatrix::from_pure(weighted_pure_state(lam, ph));
  for (int n : {2, 3}) EXPECT_NEAR(g_n(lam, 0.9, n), oracle::moment_quadrature(rho.matrix(), ph, 0.9, n, 40), 1e-9);
}

TEST(Partials, AnalyticMatchesFiniteDifference) {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const SimplexVector lam = SimplexVector::random(2 + t % 5, rng);
    for (int n : {2, 3})
      for (double s : {0.1, 1.0, 2.0})
        for (int i = 0; i < lam.dim(); ++i) {
          if (lam[i] < 0.01) continue;  // sqrt terms: FD step too coarse near 0
          const double a = g_n_partial(lam, s, n, i);
          ASSERT_NEAR(a, g_n_partial_fd(lam, s, n, i), 1e-6 * std::max(1.0, std::abs(a)));
        }
  }
}

TEST(SchurCondition, Examples) {
  const SimplexVector eq({0.3, 0.3, 0.4});
  EXPECT_NEAR(schur_condition(eq, 1.0, 2, 0, 1), 0.0, 1e-15);
  EXPECT_THROW(schur_condition(eq, 1.0, 2, 1, 1), std::invalid_argument);
  EXPECT_THROW(schur_condition(SimplexVector({0.5, 0.5, 0.0}), 1.0, 2, 0, 2), std::invalid_argument);
  Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    const SimplexVector lam = SimplexVector::random(2 + t % 5, rng);
    for (int n : {2, 3})
      for (double s : {0.1, 1.0, 2.0}) ASSERT_LE(max_schur_condition(lam, s, n), 1e-8);
  }
}

TEST(SchurCondition, FiniteDifferenceVersionAlsoNonPositive) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const SimplexVector lam = SimplexVector::random(3 + t % 3, rng);
    for (int n : {2, 3})
      for (double s : {0.1, 1.0, 2.0}) {
        const double sij = (lam[0] - lam[1]) * (g_n_partial_fd(lam, s, n, 0) - g_n_partial_fd(lam, s, n, 1));
        ASSERT_LE(sij, 1e-7);
      }
  }
}

TEST(AlignedMoment, EqualityAndStrictInequality) {
  const SimplexVector u = SimplexVector::uniform(4, 4);
  const std::vector<double> zero(4, 0.0);
  for (int n : {2, 3}) {
    const MomentBoundPair p = aligned_pure_moment_equals_g(u, zero, 0.8, n);
    EXPECT_NEAR(p.lhs, p.rhs, 1e-10);
    EXPECT_NEAR(p.rhs, threshold(n, 4, 0.8), 1e-10);
  }
  Rng rng(12);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int t = 0; t < 50; ++t) {
    const SimplexVector lam = SimplexVector::random(2 + t % 4, rng);
    std::vector<double> ph(static_cast<std::size_t>(lam.dim()));
    for (auto& x : ph) x = ang(rng);
    const int n = 2 + t % 2;
    const MomentBoundPair a = aligned_pure_moment_equals_g(lam, ph, 1.1, n);
    ASSERT_NEAR(a.lhs, a.rhs, 1e-10);
    std::vector<double> shifted = ph;
    for (auto& x : shifted) x += 0.77;
    const MomentBoundPair g = pure_moment_vs_g(lam, ph, shifted, 1.1, n);
    ASSERT_NEAR(g.lhs, g.rhs, 1e-10);
    std::vector<double> off = ph;
    off[0] += M_PI / 3.0;
    const MomentBoundPair m = pure_moment_vs_g(lam, ph, off, 1.1, n);
    ASSERT_LT(m.lhs, m.rhs - 1e-12);
  }
}

TEST(Majorization, RobinHoodNeverDecreasesG) {
  Rng rng(14);
  for (int t = 0; t < 1000; ++t) {
    const SimplexVector lam = SimplexVector::random(2 + t % 5, rng);
    const SimplexVector flatter = robin_hood_transfer(lam, rng);
    // majorization check on sorted partial sums
    std::vector<double> a = lam.weights(), b = flatter.weights();
    std::sort(a.rbegin(), a.rend());
    std::sort(b.rbegin(), b.rend());
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sa += a[i];
      sb += b[i];
      ASSERT_LE(sb, sa + 1e-12);
    }
    for (int n : {2, 3})
      for (double s : {0.1, 1.0, 2.0}) ASSERT_GE(g_n(flatter, s, n), g_n(lam, s, n) - 1e-10);
  }
}

TEST(Majorization, UniformIsMaximal) {
  Rng rng(15);
  for (int t = 0; t < 300; ++t) {
    const int d = 2 + t % 5;
    const int k = 1 + t % d;
    const SimplexVector lam = SimplexVector::random(d, rng, k);
    for (int n : {2, 3})
      for (double s : {0.1, 1.0}) ASSERT_LE(g_n(lam, s, n), g_n(SimplexVector::uniform(k, d), s, n) + 1e-10);
  }
}
