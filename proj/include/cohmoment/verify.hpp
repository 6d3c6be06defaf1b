#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cohmoment/io.hpp"
#include "cohmoment/moments.hpp"
#include "cohmoment/pattern.hpp"
#include "cohmoment/qstate.hpp"
#include "cohmoment/rng.hpp"
#include "cohmoment/schur.hpp"
#include "cohmoment/thresholds.hpp"

namespace cohmoment {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20240611;
  int schur_samples = 10000;
  std::size_t oracle_samples = 200000;
  int oracle_cases = 12;
  unsigned threads = 1;
  CoefficientFn coeff = coefficient;
};

/// |exact - estimate| in standard errors. Differences at rounding level count
/// as zero (a point-mass pattern gives a vanishing stderr).
inline double oracle_discrepancy(double exact, const McEstimate& mc) {
  const double diff = std::abs(exact - mc.estimate);
  if (diff <= 1e-12 * std::max(1.0, std::abs(exact))) return 0.0;
  return mc.std_error > 0.0 ? diff / mc.std_error : std::numeric_limits<double>::infinity();
}

/// (n, k) pairs in n = 1..3, k = 1..max_k where sum_l v_l != k^(2n-1).
inline std::vector<std::pair<int, int>> sum_rule_failures(const CoefficientFn& coeff, int max_k = 10) {
  std::vector<std::pair<int, int>> bad;
  for (int n = 1; n <= 3; ++n)
    for (int k = 1; k <= max_k; ++k) {
      std::int64_t s = 0;
      for (int l = 0; l <= n * n; ++l) s += coeff(n, k, l);
      std::int64_t want = 1;
      for (int p = 0; p < 2 * n - 1; ++p) want *= k;
      if (s != want) bad.emplace_back(n, k);
    }
  return bad;
}

inline std::vector<CheckResult> verify_thresholds(const VerifyOptions& opt = {}) {
  std::vector<CheckResult> out;

  const auto bad = sum_rule_failures(opt.coeff);
  std::ostringstream sr;
  if (bad.empty()) {
    sr << "sum_l v_l = k^(2n-1) for n=1..3, k=1..10";
  } else {
    sr << "violated at (n,k) =";
    for (const auto& [n, k] : bad) sr << " (" << n << "," << k << ")";
  }
  out.push_back({"coefficient sum rule", bad.empty(), sr.str()});

  // The flat tabulated v_1 = 4 for n = 2 against the corrected 4(k-1)^2.
  std::vector<int> flat_breaks;
  for (int k = 1; k <= 10; ++k) {
    std::int64_t s = 4;
    for (int l = 0; l <= 4; ++l)
      if (l != 1) s += coefficient(2, k, l);
    if (s != static_cast<std::int64_t>(k) * k * k) flat_breaks.push_back(k);
  }
  std::ostringstream disc;
  disc << "n=2 l=1: flat value 4 breaks the sum rule at k = " << join(flat_breaks)
       << "; shipped value 4(k-1)^2 (agrees at k=2)";
  const std::vector<int> expected{1, 3, 4, 5, 6, 7, 8, 9, 10};
  out.push_back({"n=2 v_1 discrepancy", flat_breaks == expected, disc.str()});

  double worst = 0.0;
  for (int d = 1; d <= 7; ++d)
    for (int k = 1; k <= d; ++k) {
      const DensityMatrix w = DensityMatrix::from_pure(w_state(k, d));
      for (double sigma : {0.0, 0.5, 1.0, 2.0})
        for (int n = 1; n <= 3; ++n)
          worst = std::max(worst, std::abs(threshold(n, k, sigma) - generalized_moment(w, PhaseVector::zeros(d), sigma, n)));
    }
  out.push_back({"threshold equals Q_n(W_k)", worst <= 1e-10, "max |diff| = " + fmt(worst) + " (k <= d <= 7)"});
  return out;
}

inline std::vector<CheckResult> verify_moments(const VerifyOptions& opt = {}) {
  std::vector<CheckResult> out;
  Rng rng(stream_seed(opt.seed, 1));
  std::uniform_real_distribution<double> ang(0.0, kTwoPi), wid(0.0, 2.0);
  std::uniform_int_distribution<int> dim(1, 4), ord(1, 3);

  double worst_z = 0.0;
  for (int c = 0; c < opt.oracle_cases; ++c) {
    const int d = dim(rng);
    const int n = ord(rng);
    const DensityMatrix rho = sample_random_state(d, rng);
    std::vector<double> mu(static_cast<std::size_t>(d));
    for (auto& m : mu) m = ang(rng);
    const MomentRequest req(n, WrappedNormalSpec(PhaseVector(mu), wid(rng)));
    const double exact = generalized_moment(rho, req);
    const McEstimate mc = mc_oracle(rho, req, opt.oracle_samples, stream_seed(opt.seed, 2, static_cast<std::uint64_t>(c)), opt.threads);
    const double z = oracle_discrepancy(exact, mc);
    worst_z = std::max(worst_z, z);
  }
  out.push_back({"closed form vs Monte Carlo", worst_z <= 4.0,
                 "max |diff|/stderr = " + fmt(worst_z) + " over " + std::to_string(opt.oracle_cases) + " cases"});

  double worst_exp = 0.0;
  for (int c = 0; c < 20; ++c) {
    const int d = dim(rng) + 1;
    const int n = ord(rng);
    const DensityMatrix rho = sample_random_state(d, rng);
    std::vector<double> mu(static_cast<std::size_t>(d));
    for (auto& m : mu) m = ang(rng);
    const double sigma = wid(rng);
    const MomentExpansion ex(rho, n);
    const double direct = generalized_moment(rho, PhaseVector(mu), sigma, n);
    worst_exp = std::max(worst_exp, std::abs(ex.evaluate(PhaseVector(mu), sigma) - direct) / std::max(1.0, std::abs(direct)));
  }
  out.push_back({"frequency expansion vs tuple sum", worst_exp <= 1e-10, "max rel diff = " + fmt(worst_exp)});

  double worst_shift = 0.0;
  for (int c = 0; c < 50; ++c) {
    const int d = dim(rng) + 1;
    const int n = ord(rng);
    const DensityMatrix rho = sample_random_state(d, rng);
    std::vector<double> mu(static_cast<std::size_t>(d)), shifted(static_cast<std::size_t>(d));
    const double g = ang(rng);
    for (std::size_t j = 0; j < mu.size(); ++j) {
      mu[j] = ang(rng);
      shifted[j] = mu[j] + g;
    }
    const double sigma = wid(rng);
    worst_shift = std::max(worst_shift, std::abs(generalized_moment(rho, PhaseVector(mu), sigma, n) -
                                                 generalized_moment(rho, PhaseVector(shifted), sigma, n)));
  }
  out.push_back({"global phase invariance", worst_shift <= 1e-12, "max |diff| = " + fmt(worst_shift)});
  return out;
}

inline std::vector<CheckResult> verify_schur(const VerifyOptions& opt = {}) {
  std::vector<CheckResult> out;
  Rng rng(stream_seed(opt.seed, 3));
  std::uniform_int_distribution<int> dim(2, 6);
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < opt.schur_samples; ++s) {
    const SimplexVector lam = SimplexVector::random(dim(rng), rng);
    for (int n : {2, 3})
      for (double sigma : {0.1, 1.0, 2.0}) worst = std::max(worst, max_schur_condition(lam, sigma, n));
  }
  out.push_back({"Schur condition S_ij <= 1e-8", worst <= 1e-8,
                 "max S_ij = " + fmt(worst) + " over " + std::to_string(opt.schur_samples) + " simplex points"});

  double excess = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < 1000; ++s) {
    const int d = dim(rng);
    std::uniform_int_distribution<int> sup(1, d);
    const int k = sup(rng);
    const SimplexVector lam = SimplexVector::random(d, rng, k);
    const SimplexVector flat = SimplexVector::uniform(k, d);
    for (int n : {2, 3})
      for (double sigma : {0.1, 1.0, 2.0}) excess = std::max(excess, g_n(lam, sigma, n) - g_n(flat, sigma, n));
  }
  out.push_back({"g_n maximal at uniform weights", excess <= 1e-10, "max g(lambda) - g(uniform) = " + fmt(excess)});
  return out;
}

/// scope: all, moments, thresholds, schur.
inline std::vector<CheckResult> run_verify(const std::string& scope, const VerifyOptions& opt = {}) {
  std::vector<CheckResult> out;
  auto add = [&out](std::vector<CheckResult> r) { out.insert(out.end(), r.begin(), r.end()); };
  if (scope == "all" || scope == "thresholds") add(verify_thresholds(opt));
  if (scope == "all" || scope == "moments") add(verify_moments(opt));
  if (scope == "all" || scope == "schur") add(verify_schur(opt));
  if (out.empty()) throw InputError("verify: unknown scope '" + scope + "' (all, moments, thresholds, schur)");
  return out;
}

}  // namespace cohmoment
