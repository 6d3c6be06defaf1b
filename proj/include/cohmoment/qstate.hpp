#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cohmoment/rng.hpp"

namespace cohmoment {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kNormTol = 1e-12;

/// Raised when a matrix or vector fails one of the state invariants. The
/// message names the invariant and the size of the violation.
class StateError : public std::invalid_argument {
 public:
  enum class Kind { NotSquare, NotHermitian, TraceNotOne, NotPositive, NotNormalized };

  StateError(Kind kind, double magnitude, const std::string& what)
      : std::invalid_argument(what), kind_(kind), magnitude_(magnitude) {}

  Kind kind() const noexcept { return kind_; }
  double magnitude() const noexcept { return magnitude_; }

 private:
  Kind kind_;
  double magnitude_;
};

inline const char* to_string(StateError::Kind kind) {
  switch (kind) {
    case StateError::Kind::NotSquare: return "NotSquare";
    case StateError::Kind::NotHermitian: return "NotHermitian";
    case StateError::Kind::TraceNotOne: return "TraceNotOne";
    case StateError::Kind::NotPositive: return "NotPositive";
    case StateError::Kind::NotNormalized: return "NotNormalized";
  }
  return "Unknown";
}

namespace detail {
[[noreturn]] inline void state_error(StateError::Kind kind, double magnitude,
                                     const std::string& detail) {
  std::ostringstream os;
  os.precision(6);
  os << to_string(kind) << ": " << detail << " (magnitude " << magnitude << ")";
  throw StateError(kind, magnitude, os.str());
}

inline void require_dim(int d, const char* what) {
  if (d < 1) throw std::invalid_argument(std::string(what) + ": dimension must be >= 1");
}
}  // namespace detail

/// A pure state vector with unit norm.
class PureState {
 public:
  explicit PureState(CVector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() == 0) throw std::invalid_argument("PureState: empty amplitude vector");
    const double dev = std::abs(amps_.squaredNorm() - 1.0);
    if (dev > kNormTol) detail::state_error(StateError::Kind::NotNormalized, dev, "squared norm differs from 1");
  }

  int dim() const noexcept { return static_cast<int>(amps_.size()); }
  const CVector& amplitudes() const noexcept { return amps_; }
  Complex operator[](int j) const { return amps_(j); }

  /// Indices of nonzero amplitudes.
  std::vector<int> support(double tol = 0.0) const {
    std::vector<int> s;
    for (int j = 0; j < dim(); ++j)
      if (std::abs(amps_(j)) > tol) s.push_back(j);
    return s;
  }

 private:
  CVector amps_;
};

/// Hermitian, unit-trace, positive-semidefinite d x d matrix. Instances only
/// exist after passing `validate`, so downstream code can rely on the
/// invariants without re-checking.
class DensityMatrix {
 public:
  static DensityMatrix validate(CMatrix m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      detail::state_error(StateError::Kind::NotSquare, static_cast<double>(m.rows() - m.cols()),
                          "matrix must be square and non-empty");
    }
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kHermitianTol) detail::state_error(StateError::Kind::NotHermitian, herm, "rho != rho^dagger");

    const double tr_dev = std::abs(m.trace() - Complex(1.0, 0.0));
    if (tr_dev > kTraceTol) detail::state_error(StateError::Kind::TraceNotOne, tr_dev, "trace differs from 1");

    Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -kPsdTol) detail::state_error(StateError::Kind::NotPositive, lo, "negative eigenvalue");
    return DensityMatrix(std::move(m));
  }

  static DensityMatrix from_pure(const PureState& psi) {
    return validate(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const noexcept { return m_; }
  Complex operator()(int i, int j) const { return m_(i, j); }

 private:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

enum class EnsembleKind { RhoAFamily, CueRandom, KCoherentPure };

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::CueRandom;
  int dim = 1;
  int size = 1;
  std::uint64_t seed = 0;
  int k = 1;  // only used by KCoherentPure

  void check() const {
    detail::require_dim(dim, "EnsembleSpec");
    if (size < 1) throw std::invalid_argument("EnsembleSpec: size must be >= 1");
    if (kind == EnsembleKind::KCoherentPure && (k < 1 || k > dim))
      throw std::invalid_argument("EnsembleSpec: k must satisfy 1 <= k <= dim");
  }
};

/// Convex combination eta * a + (1 - eta) * b.
inline DensityMatrix mix(double eta, const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("mix: dimension mismatch");
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("mix: eta outside [0, 1]");
  return DensityMatrix::validate(eta * a.matrix() + (1.0 - eta) * b.matrix());
}

inline DensityMatrix maximally_mixed(int d) {
  detail::require_dim(d, "maximally_mixed");
  return DensityMatrix::validate(CMatrix::Identity(d, d) / static_cast<double>(d));
}

/// Balanced superposition of the first k basis states with amplitude phases
/// e^{-i phases[j]}.
inline PureState w_state(int k, int d, const std::vector<double>& phases) {
  detail::require_dim(d, "w_state");
  if (k < 1 || k > d) throw std::invalid_argument("w_state: k must satisfy 1 <= k <= d");
  if (static_cast<int>(phases.size()) != k) throw std::invalid_argument("w_state: need exactly k phases");
  CVector a = CVector::Zero(d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(k));
  for (int j = 0; j < k; ++j) a(j) = std::polar(amp, -phases[j]);
  a /= a.norm();
  return PureState(std::move(a));
}

inline PureState w_state(int k, int d) { return w_state(k, d, std::vector<double>(k, 0.0)); }

namespace detail {
/// Matrix with 1/d on the diagonal and `off` everywhere else.
inline CMatrix uniform_offdiag(int d, double off) {
  CMatrix m = CMatrix::Constant(d, d, Complex(off, 0.0));
  m.diagonal().setConstant(Complex(1.0 / d, 0.0));
  return m;
}
}  // namespace detail

/// a |Psi_W><Psi_W| + (1 - a) 1/d with the fully balanced real W state.
inline DensityMatrix rho_a(int d, double a) {
  detail::require_dim(d, "rho_a");
  if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("rho_a: a must lie in [0, 1]");
  return DensityMatrix::validate(detail::uniform_offdiag(d, a / d));
}

/// Mixing weight of |W_d><W_d| in the purity-P maximizer of Q_2.
inline double max_purity_weight(int d, double purity) {
  detail::require_dim(d, "max_purity_weight");
  const double lo = 1.0 / d;
  if (!(purity >= lo - 1e-15 && purity <= 1.0 + 1e-15))
    throw std::invalid_argument("purity must lie in [1/d, 1]");
  if (d == 1) return 0.0;
  return std::sqrt(std::max(0.0, (purity * d - 1.0) / (d - 1.0)));
}

inline DensityMatrix rho_max_purity(int d, double purity) {
  const double w = max_purity_weight(d, purity);
  return DensityMatrix::validate(detail::uniform_offdiag(d, w / d));
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
/// R's diagonal moved into Q.
inline CMatrix sample_cue_unitary(int d, Rng& rng) {
  detail::require_dim(d, "sample_cue_unitary");
  std::normal_distribution<double> normal(0.0, std::numbers::sqrt2 / 2.0);
  CMatrix z(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      z(i, j) = Complex(re, im);
    }
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ();
  const CMatrix& r = qr.matrixQR();
  for (int j = 0; j < d; ++j) {
    const Complex rjj = r(j, j);
    const double mag = std::abs(rjj);
    q.col(j) *= mag > 0.0 ? rjj / mag : Complex(1.0, 0.0);
  }
  return q;
}

inline CMatrix sample_cue_unitary(int d, std::uint64_t seed) {
  Rng rng(stream_seed(seed, 0));
  return sample_cue_unitary(d, rng);
}

/// rho = U diag(|v|^2) U^dagger with U and the column v drawn from two
/// independent CUE unitaries.
inline DensityMatrix sample_random_state(int d, Rng& rng) {
  const CMatrix u = sample_cue_unitary(d, rng);
  const CMatrix v = sample_cue_unitary(d, rng);
  Eigen::VectorXd spectrum = v.col(0).cwiseAbs2();
  spectrum /= spectrum.sum();
  CMatrix rho = u * spectrum.cast<Complex>().asDiagonal() * u.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityMatrix::validate(std::move(rho));
}

inline DensityMatrix sample_random_state(int d, std::uint64_t seed) {
  Rng rng(stream_seed(seed, 0));
  return sample_random_state(d, rng);
}

/// Random pure state supported on exactly k of the d basis states: weights
/// from the flat Dirichlet on the k-simplex, i.i.d. uniform phases, and a
/// uniformly random support subset.
inline PureState sample_k_coherent_pure(int k, int d, Rng& rng) {
  detail::require_dim(d, "sample_k_coherent_pure");
  if (k < 1 || k > d) throw std::invalid_argument("sample_k_coherent_pure: k must satisfy 1 <= k <= d");

  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {  // partial Fisher-Yates
    std::uniform_int_distribution<int> pick(i, d - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }

  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) {
    do x = expo(rng); while (x == 0.0);
    total += x;
  }
  CVector a = CVector::Zero(d);
  for (int i = 0; i < k; ++i) a(idx[i]) = std::polar(std::sqrt(w[i] / total), -angle(rng));
  a /= a.norm();
  return PureState(std::move(a));
}

inline PureState sample_k_coherent_pure(int k, int d, std::uint64_t seed) {
  Rng rng(stream_seed(seed, 0));
  return sample_k_coherent_pure(k, d, rng);
}

inline double purity(const DensityMatrix& rho) { return rho.matrix().cwiseAbs2().sum(); }

inline double l1_coherence(const DensityMatrix& rho) {
  const CMatrix& m = rho.matrix();
  return m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum();
}

}  // namespace cohmoment
