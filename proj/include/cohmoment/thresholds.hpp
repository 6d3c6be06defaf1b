#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cohmoment/moments.hpp"
#include "cohmoment/parallel.hpp"
#include "cohmoment/qstate.hpp"
#include "cohmoment/rng.hpp"

namespace cohmoment {

/// Integer coefficient v_l^{(n,k)} of the k-coherence threshold
///   Q_n^{(k)}(sigma) = k^{1-n} sum_{l=0}^{n^2} v_l e^{-l sigma^2}.
/// K_m = k - m. The n = 2, l = 1 entry is 4 (k-1)^2: this is what the
/// balanced-state expansion gives and what the sigma = 0 sum rule
/// sum_l v_l = k^{2n-1} requires; a flat 4 only agrees at k = 2.
inline std::int64_t coefficient(int n, std::int64_t k, int l) {
  if (n < 1 || n > 3) throw std::invalid_argument("coefficient: order must be 1, 2 or 3");
  if (k < 1) throw std::invalid_argument("coefficient: k must be >= 1");
  if (l < 0 || l > n * n) throw std::invalid_argument("coefficient: l outside [0, n^2]");
  const auto K = [k](std::int64_t m) { return k - m; };
  switch (n) {
    case 1:
      return l == 0 ? 1 : K(1);
    case 2:
      switch (l) {
        case 0: return 2 * k - 1;
        case 1: return 4 * K(1) * K(1);
        case 2: return K(1) * K(2) * K(3);
        case 3: return 2 * K(1) * K(2);
        default: return K(1);
      }
    default:
      switch (l) {
        case 0: return 4 - 9 * k + 6 * k * k;
        case 1: return 3 * K(1) * (11 + 3 * k * (2 * k - 5));
        case 2: return 9 * K(1) * K(2) * K(2) * K(3);
        case 3: return K(1) * K(2) * K(2) * (45 + k * K(10));
        case 4: return 3 * K(1) * (k * (55 + 2 * k * K(9)) - 52);
        case 5: return 9 * K(1) * K(2) * K(3);
        case 6: return 2 * K(1) * K(2) * K(3);
        case 7: return 6 * K(1) * K(2);
        case 8: return 0;
        default: return K(1);
      }
  }
}

using CoefficientFn = std::function<std::int64_t(int, std::int64_t, int)>;

struct ThresholdTable {
  int order = 1;
  int max_k = 1;
  std::map<std::pair<int, int>, std::int64_t> entries;  // (k, l) -> v

  std::int64_t at(int k, int l) const { return entries.at({k, l}); }
};

inline ThresholdTable threshold_table(int n, int max_k, const CoefficientFn& coeff = coefficient) {
  if (max_k < 1) throw std::invalid_argument("threshold_table: max_k must be >= 1");
  ThresholdTable t;
  t.order = n;
  t.max_k = max_k;
  for (int k = 1; k <= max_k; ++k)
    for (int l = 0; l <= n * n; ++l) t.entries[{k, l}] = coeff(n, k, l);
  return t;
}

/// Largest Q_n attainable by any at-most-k-coherent state.
inline double threshold(int n, int k, double sigma) {
  if (n < 1 || n > 3) throw std::invalid_argument("threshold: order must be 1, 2 or 3");
  if (k < 1) throw std::invalid_argument("threshold: k must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("threshold: sigma must be >= 0");
  const double x = std::exp(-sigma * sigma);
  double acc = 0.0;
  for (int l = n * n; l >= 0; --l) acc = acc * x + static_cast<double>(coefficient(n, k, l));
  return acc * std::pow(static_cast<double>(k), 1 - n);
}

struct CoherenceVerdict {
  int certified_k = 1;
  int order = 1;
  double sigma = 0.0;
  double value = 0.0;
  /// value - threshold(certified_k - 1); empty when certified_k == 1.
  std::optional<double> margin;
};

/// q > t, with values within 1e-12 relative of t treated as equal: a
/// k-coherent state that saturates its threshold can land an ulp above it.
inline bool exceeds_threshold(double q, double t) { return q > t + 1e-12 * std::max(1.0, std::abs(t)); }

/// certified_k = 1 + max{k in [1, d-1] : q > Q_n^{(k)}(sigma)}, 1 if none.
/// Equality (to rounding) does not certify.
inline CoherenceVerdict certify(double q, int n, double sigma, int d) {
  if (!(q >= 0.0)) throw std::invalid_argument("certify: moment value must be >= 0");
  if (d < 1) throw std::invalid_argument("certify: d must be >= 1");
  CoherenceVerdict v;
  v.order = n;
  v.sigma = sigma;
  v.value = q;
  for (int k = 1; k <= d - 1; ++k) {
    if (!exceeds_threshold(q, threshold(n, k, sigma))) break;  // thresholds increase in k
    v.certified_k = k + 1;
  }
  if (v.certified_k > 1) v.margin = q - threshold(n, v.certified_k - 1, sigma);
  return v;
}

/// Largest purity at which the purity-constrained Q_2 maximizer is still at
/// most k-coherent.
inline double critical_purity(int d, int k) {
  if (d < 2) throw std::invalid_argument("critical_purity: d must be >= 2");
  if (k < 1 || k > d) throw std::invalid_argument("critical_purity: k must satisfy 1 <= k <= d");
  return static_cast<double>(k * k - 2 * k + d) / (static_cast<double>(d) * (d - 1));
}

struct PurityBound {
  int d = 0;
  int k = 0;
  double critical_purity = 0.0;
  double sigma = 0.0;
};

inline PurityBound purity_bound(int d, int k, double sigma) { return {d, k, critical_purity(d, k), sigma}; }

/// Global maximum of Q_2 over states of purity P (centers at 0).
inline double purity_bound_q2(int d, double purity, double sigma) {
  return generalized_moment(rho_max_purity(d, purity), PhaseVector::zeros(d), sigma, 2);
}

struct ConstrainedMaxOptions {
  int budget = 50;
  int max_iter = 4000;
  double penalty = 200.0;
  double purity_tol = 1e-7;
  unsigned threads = 1;
};

struct ConstrainedMaxResult {
  double value = 0.0;
  double purity = 0.0;
  int feasible_restarts = 0;
  int restarts = 0;
};

namespace detail {

// Q_2 at centers 0 as a real quadratic form vec(rho)^T M vec(rho), with
// vec index a = i * d + j for rho_ij.
inline Eigen::MatrixXd q2_form(int d, double sigma) {
  std::vector<double> r(5);
  for (int m = 0; m <= 4; ++m) r[static_cast<std::size_t>(m)] = std::exp(-0.5 * m * m * sigma * sigma);
  const int dd = d * d;
  Eigen::MatrixXd form(dd, dd);
  std::vector<int> cnt(static_cast<std::size_t>(d), 0);
  for (int i1 = 0; i1 < d; ++i1)
    for (int i3 = 0; i3 < d; ++i3)
      for (int i2 = 0; i2 < d; ++i2)
        for (int i4 = 0; i4 < d; ++i4) {
          std::fill(cnt.begin(), cnt.end(), 0);
          ++cnt[static_cast<std::size_t>(i1)];
          ++cnt[static_cast<std::size_t>(i2)];
          --cnt[static_cast<std::size_t>(i3)];
          --cnt[static_cast<std::size_t>(i4)];
          double w = 1.0;
          for (int c : cnt) w *= r[static_cast<std::size_t>(std::abs(c))];
          form(i1 * d + i3, i2 * d + i4) = w;
        }
  return form;
}

// Maximizes Q_2 over rho = sum_m embed_m(L_m L_m^dagger) / trace, one complex
// k x k factor per k-subset of the basis, with purity pinned to P: states of
// purity >= P are mixed with 1/d down to exactly P (mixing with the
// incoherent state keeps the block form); states below P pay a quadratic
// penalty.
class BlockStateAscent {
 public:
  BlockStateAscent(int d, int k, double purity, double sigma, const ConstrainedMaxOptions& opt)
      : d_(d), k_(k), p_(purity), x_(std::exp(-sigma * sigma)), opt_(opt), form_(q2_form(d, sigma)) {
    std::vector<int> pick(static_cast<std::size_t>(k));
    enumerate_subsets(0, 0, pick);
  }

  struct Outcome {
    CMatrix rho;
    double purity;
    bool feasible;
  };

  enum class Start { Random, UniformBlocks, SingleBlock };

  Outcome run(Rng& rng, Start start = Start::Random) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto nblocks = subsets_.size();
    std::vector<CMatrix> factors(nblocks);
    for (std::size_t m = 0; m < nblocks; ++m) {
      auto& f = factors[m];
      // Skewed block weights so some random starts sit near a single dominant block.
      double scale = 1e-3;
      if (start == Start::Random) {
        const double u = unif(rng);
        scale = u * u * u * u;
      }
      f.resize(k_, k_);
      for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k_; ++j) {
          const double re = normal(rng);
          const double im = normal(rng);
          f(i, j) = scale * Complex(re, im);
        }
      // aligned W_k columns: every block, or only the first
      if (start == Start::UniformBlocks || (start == Start::SingleBlock && m == 0)) f.col(0).array() += 1.0;
    }

    std::vector<CMatrix> grad;
    double h = objective(factors, &grad);
    double step = 1.0;
    int stall = 0;
    for (int it = 0; it < opt_.max_iter; ++it) {
      const double g2 = norm2(grad);
      if (g2 < 1e-26) break;
      double t = step;
      std::vector<CMatrix> trial(nblocks);
      double ht = h;
      bool ok = false;
      for (int bt = 0; bt < 50; ++bt) {
        for (std::size_t m = 0; m < nblocks; ++m) trial[m] = factors[m] + t * grad[m];
        ht = objective(trial, nullptr);
        if (ht >= h + 1e-4 * t * g2) {
          ok = true;
          break;
        }
        t *= 0.5;
      }
      if (!ok) break;
      std::vector<CMatrix> g_new;
      ht = objective(trial, &g_new);
      double ss = 0.0, sy = 0.0;
      for (std::size_t m = 0; m < nblocks; ++m) {
        const CMatrix s = trial[m] - factors[m];
        const CMatrix y = g_new[m] - grad[m];
        ss += s.squaredNorm();
        sy += (s.array().conjugate() * y.array()).real().sum();
      }
      step = sy < 0.0 ? std::clamp(-ss / sy, 1e-8, 1e4) : std::min(2.0 * t, 1e4);
      stall = (ht - h <= 1e-15 * std::max(1.0, std::abs(h))) ? stall + 1 : 0;
      factors = std::move(trial);
      grad = std::move(g_new);
      h = ht;
      if (stall >= 25) break;
    }

    Outcome out;
    const CMatrix rho0 = assemble(factors);
    const double pi0 = rho0.cwiseAbs2().sum();
    out.feasible = pi0 >= p_ - opt_.purity_tol;
    const double t = mixing_weight(pi0);
    out.rho = t * rho0 + (1.0 - t) * CMatrix::Identity(d_, d_) / static_cast<double>(d_);
    out.purity = out.rho.cwiseAbs2().sum();
    return out;
  }

 private:
  void enumerate_subsets(int start, int depth, std::vector<int>& pick) {
    if (depth == k_) {
      subsets_.push_back(pick);
      return;
    }
    for (int i = start; i <= d_ - (k_ - depth); ++i) {
      pick[static_cast<std::size_t>(depth)] = i;
      enumerate_subsets(i + 1, depth + 1, pick);
    }
  }

  static double norm2(const std::vector<CMatrix>& g) {
    double s = 0.0;
    for (const auto& m : g) s += m.squaredNorm();
    return s;
  }

  CMatrix assemble(const std::vector<CMatrix>& factors) const {
    CMatrix a = CMatrix::Zero(d_, d_);
    for (std::size_t m = 0; m < subsets_.size(); ++m) {
      const CMatrix block = factors[m] * factors[m].adjoint();
      const auto& idx = subsets_[m];
      for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k_; ++j) a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]) += block(i, j);
    }
    return a / a.trace().real();
  }

  double mixing_weight(double pi0) const {
    const double lo = 1.0 / d_;
    if (pi0 <= p_ || pi0 - lo <= 0.0) return 1.0;
    return std::sqrt((p_ - lo) / (pi0 - lo));
  }

  // Objective and (optionally) its ascent direction with respect to each
  // factor; the direction is 2 K_m L_m where K is the Hermitian gradient with
  // respect to the unnormalized sum A.
  double objective(const std::vector<CMatrix>& factors, std::vector<CMatrix>* grad) const {
    CMatrix a = CMatrix::Zero(d_, d_);
    std::vector<CMatrix> blocks(subsets_.size());
    for (std::size_t m = 0; m < subsets_.size(); ++m) {
      blocks[m] = factors[m] * factors[m].adjoint();
      const auto& idx = subsets_[m];
      for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k_; ++j)
          a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]) += blocks[m](i, j);
    }
    const double s = a.trace().real();
    const CMatrix rho0 = a / s;
    const double pi0 = rho0.cwiseAbs2().sum();

    Eigen::VectorXd v_re(d_ * d_), v_im(d_ * d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) {
        v_re(i * d_ + j) = rho0(i, j).real();
        v_im(i * d_ + j) = rho0(i, j).imag();
      }
    const Eigen::VectorXd m_re = form_ * v_re;
    const Eigen::VectorXd m_im = form_ * v_im;
    // vec^T M vec without conjugation; the imaginary part cancels for Hermitian rho.
    const double q2 = v_re.dot(m_re) - v_im.dot(m_im);

    double b1 = 0.0;
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        if (i != j) b1 += rho0(i, j).real();
    b1 *= x_;

    const bool mixed = pi0 > p_;
    double h;
    double t = 1.0;
    if (mixed) {
      t = mixing_weight(pi0);
      const double b2 = q2 - 2.0 * b1 - 1.0;
      h = 1.0 + 2.0 * t * b1 + t * t * b2;
    } else {
      const double gap = p_ - pi0;
      h = q2 - opt_.penalty * gap * gap;
    }
    if (grad == nullptr) return h;

    // Hermitian gradients with respect to rho0.
    CMatrix grad_q2(d_, d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) grad_q2(j, i) = 2.0 * Complex(m_re(i * d_ + j), m_im(i * d_ + j));
    CMatrix grad_b1 = CMatrix::Constant(d_, d_, Complex(x_, 0.0));
    grad_b1.diagonal().setZero();

    CMatrix g;
    if (mixed) {
      const double b2 = q2 - 2.0 * b1 - 1.0;
      const double dt = -t / (2.0 * (pi0 - 1.0 / d_));
      g = 2.0 * t * grad_b1 + t * t * (grad_q2 - 2.0 * grad_b1) + (2.0 * b1 + 2.0 * t * b2) * dt * 2.0 * rho0;
    } else {
      g = grad_q2 + 4.0 * opt_.penalty * (p_ - pi0) * rho0;
    }
    g = 0.5 * (g + g.adjoint()).eval();
    const double gamma = (g * rho0).trace().real();
    const CMatrix ga = (g - gamma * CMatrix::Identity(d_, d_)) / s;

    grad->assign(subsets_.size(), CMatrix());
    for (std::size_t m = 0; m < subsets_.size(); ++m) {
      const auto& idx = subsets_[m];
      CMatrix kblock(k_, k_);
      for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k_; ++j) kblock(i, j) = ga(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      (*grad)[m] = 2.0 * kblock * factors[m];
    }
    return h;
  }

  int d_;
  int k_;
  double p_;
  double x_;
  ConstrainedMaxOptions opt_;
  Eigen::MatrixXd form_;
  std::vector<std::vector<int>> subsets_;
};

}  // namespace detail

/// Numerical maximum of Q_2 (centers 0) over at-most-k-coherent states of
/// purity P, best of `opt.budget` random restarts. Restarts draw from streams
/// (seed, r) and are reduced in restart order.
inline ConstrainedMaxResult purity_constrained_max_q2_detail(int d, int k, double purity, double sigma,
                                                             std::uint64_t seed,
                                                             const ConstrainedMaxOptions& opt = {}) {
  if (d < 2) throw std::invalid_argument("purity_constrained_max_q2: d must be >= 2");
  if (k < 1 || k > d) throw std::invalid_argument("purity_constrained_max_q2: k must satisfy 1 <= k <= d");
  const double lo = 1.0 / d;
  if (!(purity >= lo - 1e-15 && purity <= 1.0 + 1e-15))
    throw std::invalid_argument("purity_constrained_max_q2: purity outside [1/d, 1]");
  if (opt.budget < 1) throw std::invalid_argument("purity_constrained_max_q2: budget must be >= 1");

  ConstrainedMaxResult res;
  res.restarts = opt.budget;
  if (purity <= lo + 1e-15) {  // only 1/d has purity 1/d
    res.value = 1.0;
    res.purity = lo;
    res.feasible_restarts = opt.budget;
    return res;
  }

  const detail::BlockStateAscent ascent(d, k, purity, sigma, opt);
  std::vector<detail::BlockStateAscent::Outcome> outs(static_cast<std::size_t>(opt.budget));
  parallel_for(outs.size(), opt.threads, [&](std::size_t r) {
    using Start = detail::BlockStateAscent::Start;
    Rng rng(stream_seed(seed, r));
    const Start start = r == 0 ? Start::UniformBlocks : r == 1 ? Start::SingleBlock : Start::Random;
    outs[r] = ascent.run(rng, start);
  });

  bool have = false;
  const PhaseVector zero = PhaseVector::zeros(d);
  for (const auto& o : outs) {
    if (!o.feasible) continue;
    ++res.feasible_restarts;
    const double q = generalized_moment(DensityMatrix::validate(o.rho), zero, sigma, 2);
    if (!have || q > res.value) {
      res.value = q;
      res.purity = o.purity;
      have = true;
    }
  }
  if (!have) throw std::runtime_error("purity_constrained_max_q2: no restart reached the purity constraint");
  return res;
}

inline double purity_constrained_max_q2(int d, int k, double purity, double sigma, std::uint64_t seed,
                                        int budget = 50) {
  ConstrainedMaxOptions opt;
  opt.budget = budget;
  return purity_constrained_max_q2_detail(d, k, purity, sigma, seed, opt).value;
}

}  // namespace cohmoment
