#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "cohmoment/parallel.hpp"
#include "cohmoment/pattern.hpp"
#include "cohmoment/polynomial.hpp"
#include "cohmoment/qstate.hpp"
#include "cohmoment/rng.hpp"

namespace cohmoment {

inline constexpr int kMaxMomentOrder = 3;

/// Independent wrapped normal laws on each phase: centers mu_j, common width.
struct WrappedNormalSpec {
  PhaseVector centers;
  double sigma = 0.0;

  WrappedNormalSpec() = default;
  WrappedNormalSpec(PhaseVector mu, double width) : centers(std::move(mu)), sigma(width) {
    if (!std::isfinite(sigma) || sigma < 0.0)
      throw std::invalid_argument("WrappedNormalSpec: sigma must be finite and >= 0");
  }
};

struct MomentRequest {
  int order = 1;
  WrappedNormalSpec spec;

  MomentRequest() = default;
  MomentRequest(int n, WrappedNormalSpec s) : order(n), spec(std::move(s)) {
    if (order < 1 || order > kMaxMomentOrder)
      throw std::invalid_argument("MomentRequest: order must be 1, 2 or 3");
  }
};

/// Theta_n(mu) = e^{i n mu} e^{-n^2 sigma^2 / 2}.
inline Complex trig_moment(int n, double mu, double sigma) {
  return std::polar(std::exp(-0.5 * n * n * sigma * sigma), n * mu);
}

namespace detail {

inline void check_order(int n, const char* where) {
  if (n < 1 || n > kMaxMomentOrder)
    throw std::invalid_argument(std::string(where) + ": unsupported moment order " + std::to_string(n));
}

// Theta_m(mu_j) for |m| <= order, row-major in (j, m + order).
class ThetaTable {
 public:
  ThetaTable(const PhaseVector& mu, double sigma, int order, bool uniform)
      : width_(2 * order + 1), order_(order), t_(static_cast<std::size_t>(mu.size() * width_)) {
    for (int j = 0; j < mu.size(); ++j)
      for (int m = -order; m <= order; ++m)
        t_[static_cast<std::size_t>(j * width_ + m + order)] =
            (m == 0) ? Complex(1.0, 0.0) : (uniform ? Complex(0.0, 0.0) : trig_moment(m, mu[j], sigma));
  }
  Complex operator()(int j, int m) const { return t_[static_cast<std::size_t>(j * width_ + m + order_)]; }

 private:
  int width_;
  int order_;
  std::vector<Complex> t_;
};

// Compensated running sum; the tuple sums have up to 7^6 terms.
struct NeumaierSum {
  double sum = 0.0, carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

// Sum over index tuples (i_1..i_2n) of rho_{i_1 i_{n+1}} ... rho_{i_n i_{2n}}
// times prod_j Theta_{n_j}(mu_j). Pairs (i_l, i_{n+l}) are enumerated level by
// level; `counts` holds the running exponent vector n_j in place.
class TupleSum {
 public:
  TupleSum(const CMatrix& rho, const ThetaTable& theta, int order)
      : rho_(rho), theta_(theta), order_(order), d_(static_cast<int>(rho.rows())), counts_(d_, 0) {}

  Complex run() {
    re_ = {};
    im_ = {};
    descend(0, Complex(1.0, 0.0));
    return {re_.value(), im_.value()};
  }

 private:
  void descend(int level, Complex prod) {
    if (level == order_) {
      Complex th(1.0, 0.0);
      for (int j = 0; j < d_; ++j)
        if (counts_[j] != 0) th *= theta_(j, counts_[j]);
      const Complex term = prod * th;
      re_.add(term.real());
      im_.add(term.imag());
      return;
    }
    for (int a = 0; a < d_; ++a) {
      ++counts_[a];
      for (int b = 0; b < d_; ++b) {
        const Complex r = rho_(a, b);
        if (r == Complex(0.0, 0.0)) continue;
        --counts_[b];
        descend(level + 1, prod * r);
        ++counts_[b];
      }
      --counts_[a];
    }
  }

  const CMatrix& rho_;
  const ThetaTable& theta_;
  int order_;
  int d_;
  std::vector<int> counts_;
  NeumaierSum re_, im_;
};

inline double real_checked(Complex z, const char* where) {
  if (std::abs(z.imag()) > 1e-10 * std::max(1.0, std::abs(z.real())))
    throw std::domain_error(std::string(where) + ": imaginary residue above tolerance");
  return z.real();
}

}  // namespace detail

/// Q_n for the wrapped normal F, by direct enumeration of all d^{2n} index
/// tuples. Reference path; see MomentExpansion for repeated evaluation.
inline double generalized_moment(const DensityMatrix& rho, const MomentRequest& req) {
  detail::check_order(req.order, "generalized_moment");
  detail::check_dims(rho, req.spec.centers.size(), "generalized_moment");
  const detail::ThetaTable theta(req.spec.centers, req.spec.sigma, req.order, false);
  return detail::real_checked(detail::TupleSum(rho.matrix(), theta, req.order).run(), "generalized_moment");
}

inline double generalized_moment(const DensityMatrix& rho, const PhaseVector& mu, double sigma, int n) {
  return generalized_moment(rho, MomentRequest(n, WrappedNormalSpec(mu, sigma)));
}

/// Uniform moment m_n: only tuples with a vanishing exponent vector survive.
inline double uniform_moment(const DensityMatrix& rho, int n) {
  detail::check_order(n, "uniform_moment");
  const detail::ThetaTable theta(PhaseVector::zeros(rho.dim()), 0.0, n, true);
  return detail::real_checked(detail::TupleSum(rho.matrix(), theta, n).run(), "uniform_moment");
}

/// Q_1 = 1 + e^{-sigma^2} sum_{i != j} rho_ij e^{i(mu_i - mu_j)}.
inline double q1_fast(const DensityMatrix& rho, const WrappedNormalSpec& spec) {
  const int d = rho.dim();
  detail::check_dims(rho, spec.centers.size(), "q1_fast");
  const CVector u = detail::phase_kets(spec.centers.values().data(), d);
  // u^dagger rho u = sum_ij rho_ij e^{i(mu_i - mu_j)}; drop the diagonal.
  const Complex full = u.dot(rho.matrix() * u);
  const Complex off = full - rho.matrix().trace();
  return 1.0 + std::exp(-spec.sigma * spec.sigma) * detail::real_checked(off, "q1_fast");
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo estimate of E_F[P^n] with phi_j ~ N(mu_j, sigma^2) (P is
/// 2 pi-periodic, so the unwrapped normal suffices). Samples are split into
/// fixed blocks, block b drawing from stream (seed, b); block statistics are
/// merged in block order.
inline McEstimate mc_oracle(const DensityMatrix& rho, const MomentRequest& req, std::size_t samples,
                            std::uint64_t seed, unsigned threads = 1) {
  detail::check_order(req.order, "mc_oracle");
  detail::check_dims(rho, req.spec.centers.size(), "mc_oracle");
  if (samples < 1000) throw std::invalid_argument("mc_oracle: need at least 1000 samples");

  constexpr std::size_t kBlock = 1u << 14;
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  struct Partial {
    double n = 0.0, mean = 0.0, m2 = 0.0;
  };
  std::vector<Partial> parts(blocks);
  const int d = rho.dim();
  const int order = req.order;
  const double sigma = req.spec.sigma;
  const Eigen::VectorXd& mu = req.spec.centers.values();
  const CMatrix& m = rho.matrix();

  parallel_for(blocks, threads, [&](std::size_t b) {
    Rng rng(stream_seed(seed, b));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t count = std::min(kBlock, samples - b * kBlock);
    std::vector<double> phi(static_cast<std::size_t>(d));
    Partial p;
    for (std::size_t s = 0; s < count; ++s) {
      for (int j = 0; j < d; ++j) phi[static_cast<std::size_t>(j)] = mu(j) + sigma * normal(rng);
      const double x = std::pow(detail::pattern_value(m, phi.data(), d), order);
      p.n += 1.0;
      const double delta = x - p.mean;
      p.mean += delta / p.n;
      p.m2 += delta * (x - p.mean);
    }
    parts[b] = p;
  });

  Partial acc;
  for (const Partial& p : parts) {  // Chan et al. pairwise merge
    if (p.n == 0.0) continue;
    const double n = acc.n + p.n;
    const double delta = p.mean - acc.mean;
    acc.mean += delta * p.n / n;
    acc.m2 += p.m2 + delta * delta * acc.n * p.n / n;
    acc.n = n;
  }
  const double var = acc.n > 1.0 ? acc.m2 / (acc.n - 1.0) : 0.0;
  return {acc.mean, std::sqrt(var / acc.n), samples};
}

/// Frequency-domain form of P^n for a fixed state:
///   P(phi)^n = sum_f C_f e^{i f.phi},  f in Z^d, sum_j f_j = 0, |f_j| <= n,
/// so that Q_n(mu, sigma) = sum_f C_f e^{i f.mu} e^{-sigma^2 |f|^2 / 2}. Since
/// |f|^2 is even, Q_n is a polynomial of degree n^2 in x = e^{-sigma^2}.
/// Built once per state; each (mu, sigma) evaluation then costs O(#terms).
class MomentExpansion {
 public:
  static constexpr int kMaxDim = 16;

  MomentExpansion(const DensityMatrix& rho, int order) : order_(order), dim_(rho.dim()) {
    detail::check_order(order, "MomentExpansion");
    if (dim_ > kMaxDim) throw std::invalid_argument("MomentExpansion: dimension above 16");

    const CMatrix& m = rho.matrix();
    const std::uint64_t zero_key = base_key();
    std::vector<std::pair<std::uint64_t, Complex>> linear;
    linear.reserve(static_cast<std::size_t>(dim_ * dim_));
    for (int j = 0; j < dim_; ++j)
      for (int l = 0; l < dim_; ++l) {
        if (m(j, l) == Complex(0.0, 0.0)) continue;
        linear.emplace_back(shift(zero_key, j, l), m(j, l));
      }

    std::unordered_map<std::uint64_t, Complex> current{{zero_key, Complex(1.0, 0.0)}};
    for (int level = 0; level < order; ++level) {
      std::unordered_map<std::uint64_t, Complex> next;
      next.reserve(current.size() * linear.size() / 2 + 16);
      for (const auto& [k1, c1] : current)
        for (const auto& [step, c2] : linear) next[k1 + step - zero_key] += c1 * c2;
      current = std::move(next);
    }

    std::vector<std::pair<std::uint64_t, Complex>> sorted(current.begin(), current.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    terms_.reserve(sorted.size());
    for (const auto& [key, c] : sorted) {
      Term t;
      t.coeff = c;
      int norm2 = 0;
      for (int j = 0; j < dim_; ++j) {
        const int f = static_cast<int>((key >> (4 * j)) & 0xF) - kOffset;
        if (f == 0) continue;
        t.index[t.nnz] = static_cast<std::uint8_t>(j);
        t.freq[t.nnz] = static_cast<std::int8_t>(f);
        ++t.nnz;
        norm2 += f * f;
      }
      t.level = norm2 / 2;
      terms_.push_back(t);
    }
  }

  int order() const noexcept { return order_; }
  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return terms_.size(); }

  /// B_0..B_{n^2} with Q_n = sum_l B_l e^{-l sigma^2} at centers mu.
  std::vector<double> sigma_polynomial(const PhaseVector& mu) const {
    if (mu.size() != dim_) throw std::invalid_argument("MomentExpansion: dimension mismatch");
    const int width = 2 * order_ + 1;
    std::vector<Complex> powers(static_cast<std::size_t>(dim_ * width));
    for (int j = 0; j < dim_; ++j)
      for (int f = -order_; f <= order_; ++f)
        powers[static_cast<std::size_t>(j * width + f + order_)] = std::polar(1.0, f * mu[j]);

    std::vector<Complex> acc(static_cast<std::size_t>(order_ * order_ + 1), Complex(0.0, 0.0));
    for (const Term& t : terms_) {
      Complex z = t.coeff;
      for (int q = 0; q < t.nnz; ++q) z *= powers[static_cast<std::size_t>(t.index[q] * width + t.freq[q] + order_)];
      acc[static_cast<std::size_t>(t.level)] += z;
    }
    std::vector<double> out(acc.size());
    for (std::size_t l = 0; l < acc.size(); ++l) out[l] = detail::real_checked(acc[l], "MomentExpansion");
    return out;
  }

  double evaluate(const PhaseVector& mu, double sigma) const {
    return horner(sigma_polynomial(mu), std::exp(-sigma * sigma));
  }

  /// Uniform moment: the f = 0 coefficient.
  double uniform() const {
    for (const Term& t : terms_)
      if (t.nnz == 0) return detail::real_checked(t.coeff, "MomentExpansion");
    return 0.0;
  }

 private:
  static constexpr int kOffset = 8;

  struct Term {
    Complex coeff;
    std::uint8_t nnz = 0;
    std::array<std::uint8_t, 2 * kMaxMomentOrder> index{};
    std::array<std::int8_t, 2 * kMaxMomentOrder> freq{};
    int level = 0;
  };

  std::uint64_t base_key() const {
    std::uint64_t k = 0;
    for (int j = 0; j < dim_; ++j) k |= static_cast<std::uint64_t>(kOffset) << (4 * j);
    return k;
  }
  // f += e_j - e_l on a digit-packed key; digits stay in [8 - n, 8 + n].
  static std::uint64_t shift(std::uint64_t key, int j, int l) {
    return key + (std::uint64_t{1} << (4 * j)) - (std::uint64_t{1} << (4 * l));
  }

  int order_;
  int dim_;
  std::vector<Term> terms_;
};

/// Nodes a_i = i / n, i = 0..n, used to interpolate Q_n along a segment.
inline std::vector<double> affine_nodes(int n) {
  std::vector<double> a(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) a[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
  return a;
}

/// Coefficients c_0..c_n of Q_n((1 - a) rho0 + a rho1) as a polynomial in a.
/// Q_n is an n-linear form in rho, so n + 1 evaluations determine it exactly.
inline std::vector<double> moment_polynomial_affine(const DensityMatrix& rho0, const DensityMatrix& rho1,
                                                    const MomentRequest& req) {
  if (rho0.dim() != rho1.dim()) throw std::invalid_argument("moment_polynomial_affine: dimension mismatch");
  detail::check_order(req.order, "moment_polynomial_affine");
  const std::vector<double> nodes = affine_nodes(req.order);
  std::vector<double> values;
  for (double a : nodes) values.push_back(generalized_moment(mix(a, rho1, rho0), req));
  return vandermonde_solve(nodes, values);
}

/// Fast path for many (mu, sigma) queries along one segment rho(a): holds the
/// expansions of the node states and the inverse Vandermonde matrix.
class AffineMomentFamily {
 public:
  AffineMomentFamily(const DensityMatrix& rho0, const DensityMatrix& rho1, int order)
      : order_(order), nodes_(affine_nodes(order)), vinv_(vandermonde_inverse(nodes_)) {
    if (rho0.dim() != rho1.dim()) throw std::invalid_argument("AffineMomentFamily: dimension mismatch");
    for (double a : nodes_) expansions_.emplace_back(mix(a, rho1, rho0), order);
  }

  int order() const noexcept { return order_; }

  /// Matrix C with c_p(sigma) = sum_l C(p, l) e^{-l sigma^2}.
  Eigen::MatrixXd prepare(const PhaseVector& mu) const {
    const int levels = order_ * order_ + 1;
    Eigen::MatrixXd b(order_ + 1, levels);
    for (int i = 0; i <= order_; ++i) {
      const std::vector<double> poly = expansions_[static_cast<std::size_t>(i)].sigma_polynomial(mu);
      for (int l = 0; l < levels; ++l) b(i, l) = poly[static_cast<std::size_t>(l)];
    }
    return vinv_ * b;
  }

  static std::vector<double> coefficients(const Eigen::MatrixXd& prepared, double sigma) {
    const double x = std::exp(-sigma * sigma);
    std::vector<double> c(static_cast<std::size_t>(prepared.rows()));
    for (Eigen::Index p = 0; p < prepared.rows(); ++p) {
      double acc = 0.0;
      for (Eigen::Index l = prepared.cols() - 1; l >= 0; --l) acc = acc * x + prepared(p, l);
      c[static_cast<std::size_t>(p)] = acc;
    }
    return c;
  }

  std::vector<double> coefficients(const PhaseVector& mu, double sigma) const {
    return coefficients(prepare(mu), sigma);
  }

 private:
  int order_;
  std::vector<double> nodes_;
  Eigen::MatrixXd vinv_;
  std::vector<MomentExpansion> expansions_;
};

}  // namespace cohmoment
