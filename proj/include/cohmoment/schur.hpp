#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cohmoment/moments.hpp"
#include "cohmoment/pattern.hpp"
#include "cohmoment/qstate.hpp"
#include "cohmoment/rng.hpp"

namespace cohmoment {

/// Probability vector: lambda_j >= 0, sum = 1 within 1e-12.
class SimplexVector {
 public:
  explicit SimplexVector(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw std::invalid_argument("SimplexVector: empty");
    double s = 0.0;
    for (double x : w_) {
      if (!(x >= 0.0)) throw std::invalid_argument("SimplexVector: negative or non-finite weight");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("SimplexVector: weights do not sum to 1");
  }

  /// 1/k on the first k entries, 0 on the remaining d - k.
  static SimplexVector uniform(int k, int d) {
    if (k < 1 || k > d) throw std::invalid_argument("SimplexVector::uniform: need 1 <= k <= d");
    std::vector<double> w(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < k; ++j) w[static_cast<std::size_t>(j)] = 1.0 / k;
    return SimplexVector(std::move(w));
  }

  /// Flat Dirichlet sample on the first `support` coordinates.
  static SimplexVector random(int d, Rng& rng, int support = -1) {
    if (support < 0) support = d;
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(static_cast<std::size_t>(d), 0.0);
    double s = 0.0;
    for (int j = 0; j < support; ++j) {
      w[static_cast<std::size_t>(j)] = expo(rng);
      s += w[static_cast<std::size_t>(j)];
    }
    for (auto& x : w) x /= s;
    return SimplexVector(std::move(w));
  }

  int dim() const noexcept { return static_cast<int>(w_.size()); }
  double operator[](int j) const { return w_[static_cast<std::size_t>(j)]; }
  const std::vector<double>& weights() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

/// Sum over ordered tuples of pairwise-distinct indices (i_1, ..., i_m) of
/// prod_t lambda_{i_t}^{exponents[t]}, skipping indices in `excluded`.
inline double distinct_power_sum(const std::vector<double>& lambda, const std::vector<double>& exponents,
                                 std::vector<char> excluded = {}) {
  const int d = static_cast<int>(lambda.size());
  const int m = static_cast<int>(exponents.size());
  if (excluded.empty()) excluded.assign(static_cast<std::size_t>(d), 0);
  int free_count = 0;
  for (char e : excluded) free_count += e ? 0 : 1;
  if (m > free_count) return 0.0;

  // pw[t][j] = lambda_j^{e_t}
  std::vector<std::vector<double>> pw(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(d)));
  for (int t = 0; t < m; ++t)
    for (int j = 0; j < d; ++j)
      pw[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] =
          std::pow(lambda[static_cast<std::size_t>(j)], exponents[static_cast<std::size_t>(t)]);

  double total = 0.0;
  auto rec = [&](auto&& self, int t, double prod) -> void {
    if (t == m) {
      total += prod;
      return;
    }
    for (int j = 0; j < d; ++j) {
      if (excluded[static_cast<std::size_t>(j)]) continue;
      const double f = pw[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
      if (f == 0.0) continue;
      excluded[static_cast<std::size_t>(j)] = 1;
      self(self, t + 1, prod * f);
      excluded[static_cast<std::size_t>(j)] = 0;
    }
  };
  rec(rec, 0, 1.0);
  return total;
}

/// d/d lambda_i of distinct_power_sum: each slot t in turn takes index i.
inline double distinct_power_sum_partial(const std::vector<double>& lambda, const std::vector<double>& exponents,
                                         int i) {
  const int d = static_cast<int>(lambda.size());
  std::vector<char> excl(static_cast<std::size_t>(d), 0);
  excl[static_cast<std::size_t>(i)] = 1;
  const double li = lambda[static_cast<std::size_t>(i)];
  double total = 0.0;
  for (std::size_t t = 0; t < exponents.size(); ++t) {
    std::vector<double> rest = exponents;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(t));
    const double e = exponents[t];
    total += e * std::pow(li, e - 1.0) * distinct_power_sum(lambda, rest, excl);
  }
  return total;
}

namespace detail {
inline std::vector<double> ab_exponents(int a, int b) {
  std::vector<double> e(static_cast<std::size_t>(a), 1.0);
  e.insert(e.end(), static_cast<std::size_t>(b), 0.5);
  return e;
}

struct WeightedSum {
  double weight;
  std::vector<double> exponents;
};

// g_n as a weighted list of distinct-index sums; the constant 1 carries an
// empty exponent list.
inline std::vector<WeightedSum> g_terms(double sigma, int n) {
  const double r1 = std::exp(-0.5 * sigma * sigma);
  const double r2 = std::exp(-2.0 * sigma * sigma);
  const double r3 = std::exp(-4.5 * sigma * sigma);
  const auto G = ab_exponents;
  if (n == 2) {
    return {{1.0, {}},
            {1.0 + r2 * r2, G(2, 0)},
            {2.0 * r1 * r1, G(0, 2)},
            {2.0 * r1 * r1 * (1.0 + r2), G(1, 2)},
            {r1 * r1 * r1 * r1, G(0, 4)}};
  }
  if (n == 3) {
    const double r1_2 = r1 * r1, r1_3 = r1_2 * r1, r1_4 = r1_2 * r1_2;
    return {{1.0, {}},
            {3.0 * r1_2, G(0, 2)},
            {3.0 * (1.0 + r2 * r2), G(2, 0)},
            {6.0 * r1_2 * (1.0 + r2), G(1, 2)},
            {3.0 * r1_4, G(0, 4)},
            {2.0 * (1.0 + 3.0 * r2 * r2), G(3, 0)},
            {3.0 * r1_2 * (3.0 + 4.0 * r2 + 3.0 * r2 * r2), G(2, 2)},
            {6.0 * r1_4 * (1.0 + r2), G(1, 4)},
            {r1_4 * r1_2, G(0, 6)},
            {6.0 * r1 * (2.0 * r1 + r1 * r2 + r2 * r3), {1.5, 1.0, 0.5}},
            {2.0 * r1_3 * (3.0 * r1 + r3), {1.5, 0.5, 0.5, 0.5}},
            {3.0 * r1_2 + r3 * r3, {1.5, 1.5}}};
  }
  throw std::invalid_argument("g_n: order must be 2 or 3");
}
}  // namespace detail

/// G_AB = sum over pairwise-distinct indices of prod_{A} lambda prod_{B} sqrt(lambda).
inline double g_ab(const SimplexVector& lambda, int a, int b) {
  if (a < 0 || b < 0) throw std::invalid_argument("g_ab: A and B must be >= 0");
  if (a + b > lambda.dim()) return 0.0;
  return distinct_power_sum(lambda.weights(), detail::ab_exponents(a, b));
}

/// Upper bound g_n(lambda) on Q_n for pure states with weights lambda.
inline double g_n(const SimplexVector& lambda, double sigma, int n) {
  double total = 0.0;
  for (const auto& term : detail::g_terms(sigma, n))
    total += term.weight * (term.exponents.empty() ? 1.0 : distinct_power_sum(lambda.weights(), term.exponents));
  return total;
}

/// Analytic partial derivative dg_n / d lambda_i (requires lambda_i > 0).
inline double g_n_partial(const SimplexVector& lambda, double sigma, int n, int i) {
  if (i < 0 || i >= lambda.dim()) throw std::invalid_argument("g_n_partial: index out of range");
  double total = 0.0;
  for (const auto& term : detail::g_terms(sigma, n))
    if (!term.exponents.empty()) total += term.weight * distinct_power_sum_partial(lambda.weights(), term.exponents, i);
  return total;
}

/// Central finite-difference partial on the raw coordinate, step h.
inline double g_n_partial_fd(const SimplexVector& lambda, double sigma, int n, int i, double h = 1e-6) {
  auto shifted = [&](double delta) {
    std::vector<double> w = lambda.weights();
    w[static_cast<std::size_t>(i)] += delta;
    double total = 0.0;
    for (const auto& term : detail::g_terms(sigma, n))
      total += term.weight * (term.exponents.empty() ? 1.0 : distinct_power_sum(w, term.exponents));
    return total;
  };
  return (shifted(h) - shifted(-h)) / (2.0 * h);
}

/// S_ij = (lambda_i - lambda_j)(dg/dlambda_i - dg/dlambda_j); Schur-concavity
/// requires S_ij <= 0.
inline double schur_condition(const SimplexVector& lambda, double sigma, int n, int i, int j) {
  if (i == j) throw std::invalid_argument("schur_condition: i and j must differ");
  if (!(lambda[i] > 0.0 && lambda[j] > 0.0))
    throw std::invalid_argument("schur_condition: lambda_i and lambda_j must be positive");
  return (lambda[i] - lambda[j]) * (g_n_partial(lambda, sigma, n, i) - g_n_partial(lambda, sigma, n, j));
}

/// Largest S_ij over all index pairs with both weights positive.
inline double max_schur_condition(const SimplexVector& lambda, double sigma, int n) {
  const int d = lambda.dim();
  std::vector<double> grad(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < d; ++i)
    if (lambda[i] > 0.0) grad[static_cast<std::size_t>(i)] = g_n_partial(lambda, sigma, n, i);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      if (!(lambda[i] > 0.0 && lambda[j] > 0.0)) continue;
      worst = std::max(worst, (lambda[i] - lambda[j]) * (grad[static_cast<std::size_t>(i)] - grad[static_cast<std::size_t>(j)]));
    }
  return worst;
}

/// Pure state with amplitudes sqrt(lambda_j) e^{-i phases_j}.
inline PureState weighted_pure_state(const SimplexVector& lambda, const std::vector<double>& phases) {
  if (static_cast<int>(phases.size()) != lambda.dim())
    throw std::invalid_argument("weighted_pure_state: need one phase per weight");
  CVector a(lambda.dim());
  for (int j = 0; j < lambda.dim(); ++j) a(j) = std::polar(std::sqrt(lambda[j]), -phases[static_cast<std::size_t>(j)]);
  a /= a.norm();
  return PureState(std::move(a));
}

struct MomentBoundPair {
  double lhs = 0.0;  // Q_n of the pure state
  double rhs = 0.0;  // g_n(lambda)
};

/// Q_n of the pure state (lambda, phases) at centers mu versus g_n(lambda).
/// Equality holds when mu is aligned with the phases (up to a global shift).
inline MomentBoundPair pure_moment_vs_g(const SimplexVector& lambda, const std::vector<double>& phases,
                                        const std::vector<double>& mu, double sigma, int n) {
  const DensityMatrix rho = DensityMatrix::from_pure(weighted_pure_state(lambda, phases));
  return {generalized_moment(rho, PhaseVector(mu), sigma, n), g_n(lambda, sigma, n)};
}

inline MomentBoundPair aligned_pure_moment_equals_g(const SimplexVector& lambda, const std::vector<double>& phases,
                                                    double sigma, int n) {
  return pure_moment_vs_g(lambda, phases, phases, sigma, n);
}

/// A Robin-Hood transfer: move eps in (0, (lambda_i - lambda_j)/2] from a
/// larger coordinate i to a smaller one j. The result is majorized by the
/// input.
inline SimplexVector robin_hood_transfer(const SimplexVector& lambda, Rng& rng) {
  const int d = lambda.dim();
  std::vector<double> w = lambda.weights();
  if (d < 2) return lambda;
  std::uniform_int_distribution<int> pick(0, d - 1);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int attempt = 0; attempt < 64; ++attempt) {
    int i = pick(rng);
    int j = pick(rng);
    if (i == j) continue;
    if (w[static_cast<std::size_t>(i)] < w[static_cast<std::size_t>(j)]) std::swap(i, j);
    const double gap = w[static_cast<std::size_t>(i)] - w[static_cast<std::size_t>(j)];
    if (gap <= 0.0) continue;
    const double eps = 0.5 * gap * (1.0 - frac(rng));  // (0, gap/2]
    w[static_cast<std::size_t>(i)] -= eps;
    w[static_cast<std::size_t>(j)] += eps;
    break;
  }
  return SimplexVector(std::move(w));
}

}  // namespace cohmoment
