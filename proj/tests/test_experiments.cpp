#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "cohmoment/experiments.hpp"

using namespace cohmoment;

namespace {

ExperimentConfig rho_a_config(int n_delta) {
  ExperimentConfig c;
  c.d = 7;
  c.target_k = 7;
  c.n_delta = n_delta;
  c.ensemble = EnsembleSpec{EnsembleKind::RhoAFamily, 7, 1, 0, 1};
  return c;
}

ExperimentConfig random_config(int d, int states, int n_delta) {
  ExperimentConfig c;
  c.d = d;
  c.target_k = 2;
  c.n_delta = n_delta;
  c.restarts = 8;
  c.ensemble = EnsembleSpec{EnsembleKind::CueRandom, d, states, 77, 1};
  return c;
}

// measure of {a in [0,1] : f(a) > 0} from a fine scan refined by bisection
double scan_measure(const std::function<double(double)>& f) {
  const int m = 2000;
  double total = 0.0;
  auto root = [&](double lo, double hi) {
    const bool up = f(lo) > 0.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
      const double mid = 0.5 * (lo + hi);
      ((f(mid) > 0.0) == up ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double start = f(0.0) > 0.0 ? 0.0 : -1.0;
  for (int i = 0; i < m; ++i) {
    const double a = static_cast<double>(i) / m, b = static_cast<double>(i + 1) / m;
    const bool pa = f(a) > 0.0, pb = f(b) > 0.0;
    if (pa == pb) continue;
    const double r = root(a, b);
    if (pb) {
      start = r;
    } else {
      total += r - start;
      start = -1.0;
    }
  }
  if (start >= 0.0) total += 1.0 - start;
  return total;
}

}  // namespace

TEST(Deviation, ZeroAndScale) {
  EXPECT_TRUE(sample_deviation({5, 0.0, 3}).values().isZero());
  EXPECT_THROW(sample_deviation({1, 0.2, 3}), std::invalid_argument);
  EXPECT_THROW(sample_deviation({3, -0.1, 3}), std::invalid_argument);
  // same seed, different sigma_G: proportional draws
  Rng r1(9), r2(9);
  const Eigen::VectorXd a = sample_deviation_raw(4, 0.2, r1);
  const Eigen::VectorXd b = sample_deviation_raw(4, 0.6, r2);
  EXPECT_LT((3.0 * a - b).norm(), 1e-14);
}

TEST(Deviation, CenteredVarianceIsSigmaG2) {
  const int d = 7;
  const double sg = 0.4;
  Rng rng(1234);
  const int draws = 100000;
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(draws) * d);
  for (int t = 0; t < draws; ++t) {
    const Eigen::VectorXd v = sample_deviation_raw(d, sg, rng);
    const Eigen::ArrayXd c = v.array() - v.mean();
    ASSERT_NEAR(c.sum(), 0.0, 1e-13);
    x.push_back(c(t % d));  // one component per draw keeps samples independent
  }
  double s2 = 0.0, s4 = 0.0;
  for (int t = 0; t < draws; ++t) {
    s2 += x[t] * x[t];
    s4 += x[t] * x[t] * x[t] * x[t];
  }
  const double var = s2 / draws;
  const double se = std::sqrt((s4 / draws - var * var) / draws);
  EXPECT_LE(std::abs(var - sg * sg), 3.0 * se);
}

TEST(RhoA, PointMassGivesOneSixth) {
  ExperimentConfig c = rho_a_config(3);
  c.sigmas = {0.0, 1e-9};
  const DetectionReport r = detection_ratio_rho_a(c);
  for (int n : {1, 2, 3})
    for (double s : {0.0, 1e-9}) {
      EXPECT_NEAR(r.at(n, s, 0.0).mean, 1.0 / 6.0, 1e-6);
      EXPECT_EQ(r.at(n, s, 0.0).std_error, 0.0);
      EXPECT_EQ(r.at(n, s, 0.0).n_delta, 3);
    }
}

TEST(RhoA, TargetOneAlwaysDetected) {
  ExperimentConfig c = rho_a_config(5);
  c.target_k = 1;
  c.sigmas = {0.0, 0.7};
  c.sigma_gs = {0.0, 0.5};
  for (const auto& row : detection_ratio_rho_a(c).rows) EXPECT_EQ(row.mean, 1.0);
}

TEST(RhoA, PolynomialPathMatchesDirectEvaluation) {
  const int d = 5;
  ExperimentConfig c = rho_a_config(1);
  c.d = d;
  c.target_k = 4;
  c.ensemble.dim = d;
  c.sigmas = {0.0, 0.3, 0.9};
  c.sigma_gs = {0.25};
  for (std::uint64_t seed : {3ULL, 4ULL, 5ULL}) {
    c.seed = seed;
    const DetectionReport rep = detection_ratio_rho_a(c);
    Rng rng(stream_seed(seed, 0));
    const PhaseVector mu(sample_deviation_raw(d, 0.25, rng));
    for (int n : {1, 2, 3})
      for (double s : c.sigmas) {
        const double level = threshold(n, c.target_k - 1, s);
        const double direct =
            scan_measure([&](double a) { return generalized_moment(rho_a(d, a), mu, s, n) - level; });
        EXPECT_NEAR(rep.at(n, s, 0.25).mean, direct, 1e-9) << seed << ' ' << n << ' ' << s;
      }
  }
}

TEST(RhoA, NonIncreasingInSigmaG) {
  ExperimentConfig c = rho_a_config(300);
  c.orders = {3};
  c.sigmas = {0.0, 0.5, 0.9};
  c.sigma_gs = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const DetectionReport r = detection_ratio_rho_a(c);
  for (double s : c.sigmas)
    for (std::size_t g = 1; g < c.sigma_gs.size(); ++g) {
      const DetectionRow& a = r.at(3, s, c.sigma_gs[g - 1]);
      const DetectionRow& b = r.at(3, s, c.sigma_gs[g]);
      EXPECT_LE(b.mean, a.mean + 2.0 * std::hypot(a.std_error, b.std_error));
    }
}

TEST(RhoA, ThreadCountDoesNotChangeResults) {
  ExperimentConfig c = rho_a_config(40);
  c.sigmas = {0.0, 0.6};
  c.sigma_gs = {0.3};
  const DetectionReport a = detection_ratio_rho_a(c);
  c.threads = 4;
  const DetectionReport b = detection_ratio_rho_a(c);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mean, b.rows[i].mean);
    EXPECT_EQ(a.rows[i].std_error, b.rows[i].std_error);
  }
  EXPECT_EQ(a.config_hash, b.config_hash);
}

TEST(RhoA, ConfigValidation) {
  ExperimentConfig c = rho_a_config(0);
  EXPECT_THROW(detection_ratio_rho_a(c), std::invalid_argument);
  c = rho_a_config(1);
  c.orders = {4};
  EXPECT_THROW(detection_ratio_rho_a(c), std::invalid_argument);
  c = rho_a_config(1);
  c.sigmas.clear();
  EXPECT_THROW(detection_ratio_rho_a(c), std::invalid_argument);
  c = rho_a_config(1);
  c.target_k = 8;
  EXPECT_THROW(detection_ratio_rho_a(c), std::invalid_argument);
  EXPECT_THROW(detection_ratio_random(rho_a_config(1)), std::invalid_argument);
}

TEST(Random, AllOrdersAgreeAtPointMass) {
  ExperimentConfig c = random_config(4, 30, 2);
  for (int k : {2, 3, 4}) {
    c.target_k = k;
    const DetectionReport r = detection_ratio_random(c);
    EXPECT_EQ(r.at(1, 0.0, 0.0).mean, r.at(2, 0.0, 0.0).mean);
    EXPECT_EQ(r.at(1, 0.0, 0.0).mean, r.at(3, 0.0, 0.0).mean);
  }
}

TEST(Random, TargetOneIsAlwaysDetected) {
  ExperimentConfig c = random_config(4, 10, 3);
  c.target_k = 1;
  c.sigma_gs = {0.0, 0.5};
  c.sigmas = {0.0, 1.0};
  for (const auto& row : detection_ratio_random(c).rows) EXPECT_EQ(row.mean, 1.0);
}

TEST(Random, MatchesHandComputedCertification) {
  ExperimentConfig c = random_config(4, 12, 2);
  c.sigmas = {0.0, 0.6};
  c.sigma_gs = {0.0, 0.3};
  const std::vector<int> targets{2, 3};
  const auto reports = detection_ratio_random_multi(c, targets);
  for (int k : targets)
    for (int n : c.orders)
      for (double s : c.sigmas)
        for (std::size_t g = 0; g < c.sigma_gs.size(); ++g) {
          double sum = 0.0;
          for (int t = 0; t < c.n_delta; ++t) {
            int hits = 0;
            for (int m = 0; m < c.ensemble.size; ++m) {
              Rng srng(stream_seed(c.ensemble.seed, 0, static_cast<std::uint64_t>(m)));
              const DensityMatrix rho = sample_random_state(c.d, srng);
              const PatternMaxResult peak =
                  find_pattern_max(rho, c.restarts, stream_seed(c.seed, 1, static_cast<std::uint64_t>(m)));
              Rng draw(stream_seed(c.seed, 2 + static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(t)));
              const PhaseVector mu = peak.argmax + PhaseVector(sample_deviation_raw(c.d, c.sigma_gs[g], draw));
              if (certify(generalized_moment(rho, mu, s, n), n, s, c.d).certified_k >= k) ++hits;
            }
            sum += static_cast<double>(hits) / c.ensemble.size;
          }
          EXPECT_NEAR(reports.at(k).at(n, s, c.sigma_gs[g]).mean, sum / c.n_delta, 1e-12);
        }
}

TEST(Random, MultiTargetMatchesSingleAndThreads) {
  ExperimentConfig c = random_config(5, 15, 3);
  c.sigmas = {0.0, 0.8};
  c.sigma_gs = {0.2};
  const auto multi = detection_ratio_random_multi(c, {2, 4});
  c.target_k = 4;
  c.threads = 3;
  const DetectionReport single = detection_ratio_random(c);
  for (std::size_t i = 0; i < single.rows.size(); ++i) EXPECT_EQ(single.rows[i].mean, multi.at(4).rows[i].mean);
}

TEST(Random, KCoherentStatesNeverOvercertified) {
  Rng rng(31);
  for (int t = 0; t < 300; ++t) {
    const int d = 3 + t % 4;
    const int k = 1 + t % d;
    const DensityMatrix rho = DensityMatrix::from_pure(sample_k_coherent_pure(k, d, rng));
    const PatternMaxResult peak = find_pattern_max(rho, 4, stream_seed(31, static_cast<std::uint64_t>(t)));
    for (double sg : {0.0, 0.3})
      for (double s : {0.0, 0.5, 1.5}) {
        const PhaseVector mu = peak.argmax + PhaseVector(sample_deviation_raw(d, sg, rng));
        for (int n : {1, 2, 3}) {
          const double q = generalized_moment(rho, mu, s, n);
          ASSERT_LE(q, threshold(n, k, s) + 1e-9);
        }
      }
  }
}

TEST(RStatistics, SyntheticReport) {
  DetectionReport rep;
  for (double s : {0.0, 0.35, 0.7, 1.05}) {
    rep.rows.push_back({1, s, 0.8, 0.11, 0.0, 25});
    rep.rows.push_back({3, s, 0.8, s == 0.7 ? 0.11 * 1.21 : 0.1, 0.0, 25});
    rep.rows.push_back({2, s, 0.8, 0.2 - 0.1 * s, 0.0, 25});
  }
  const auto st = r_statistics(rep, 0.8);
  ASSERT_EQ(st.size(), 3u);
  EXPECT_EQ(st[0].n, 1);
  EXPECT_NEAR(st[0].r, 1.0, 1e-15);
  EXPECT_EQ(st[0].sigma_max, 0.0);  // all equal: smallest sigma
  EXPECT_EQ(st[1].sigma_max, 0.0);  // decreasing curve
  EXPECT_NEAR(st[2].r, 1.21, 1e-12);
  EXPECT_EQ(st[2].sigma_max, 0.7);
  EXPECT_NEAR(reference_ratio(rep, 0.8), 0.11, 1e-15);
  EXPECT_THROW(r_statistics(rep, 0.3), std::invalid_argument);
}

TEST(RStatistics, ZeroReferenceGivesNaN) {
  DetectionReport rep;
  rep.rows.push_back({1, 0.0, 0.5, 0.0, 0.0, 1});
  rep.rows.push_back({2, 0.0, 0.5, 0.0, 0.0, 1});
  for (const auto& st : r_statistics(rep, 0.5)) EXPECT_TRUE(std::isnan(st.r));
}

TEST(PurityCurve, Examples) {
  const int d = 4;
  const auto rows = purity_curve(d, {2, 4}, 1.0, {0.25, 0.5}, 4, 3);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    if (r.purity == 0.25) {
      EXPECT_NEAR(r.constrained_max, 1.0, 1e-12);
      EXPECT_NEAR(r.global_max, 1.0, 1e-12);
    }
    if (r.k == d) {
      EXPECT_NEAR(r.constrained_max, r.global_max, 0.005 * r.global_max);
    }
    EXPECT_LE(r.constrained_max, r.global_max + 1e-8);
    EXPECT_NEAR(r.pure_threshold, threshold(2, r.k, 1.0), 1e-14);
  }
  EXPECT_THROW(purity_curve(1, {1}, 1.0, {1.0}, 1, 0), std::invalid_argument);
}

TEST(Hashing, StableAndSensitive) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  ExperimentConfig a = rho_a_config(10), b = a;
  b.threads = 8;
  EXPECT_EQ(a.canonical(), b.canonical());
  b.seed = 2;
  EXPECT_NE(a.canonical(), b.canonical());
}
