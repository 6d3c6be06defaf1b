#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cohmoment/qstate.hpp"
#include "cohmoment/rng.hpp"

namespace cohmoment {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduce an angle to [0, 2 pi).
inline double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

/// d phase settings (or distribution centers, or deviations) in radians,
/// stored reduced to [0, 2 pi).
class PhaseVector {
 public:
  PhaseVector() = default;
  explicit PhaseVector(const std::vector<double>& angles) : v_(static_cast<Eigen::Index>(angles.size())) {
    for (std::size_t j = 0; j < angles.size(); ++j) {
      if (!std::isfinite(angles[j])) throw std::invalid_argument("PhaseVector: non-finite component");
      v_(static_cast<Eigen::Index>(j)) = wrap_angle(angles[j]);
    }
  }
  explicit PhaseVector(const Eigen::VectorXd& angles)
      : PhaseVector(std::vector<double>(angles.data(), angles.data() + angles.size())) {}

  static PhaseVector zeros(int d) { return PhaseVector(std::vector<double>(static_cast<std::size_t>(d), 0.0)); }

  int size() const noexcept { return static_cast<int>(v_.size()); }
  double operator[](int j) const { return v_(j); }
  const Eigen::VectorXd& values() const noexcept { return v_; }
  std::vector<double> to_vector() const { return {v_.data(), v_.data() + v_.size()}; }

  PhaseVector operator+(const PhaseVector& other) const {
    if (other.size() != size()) throw std::invalid_argument("PhaseVector: size mismatch");
    return PhaseVector(Eigen::VectorXd(v_ + other.v_));
  }

 private:
  Eigen::VectorXd v_;
};

namespace detail {
inline void check_dims(const DensityMatrix& rho, int d, const char* where) {
  if (rho.dim() != d)
    throw std::invalid_argument(std::string(where) + ": dimension mismatch between state and phases");
}

inline CVector phase_kets(const double* phi, int d) {
  CVector u(d);
  for (int j = 0; j < d; ++j) u(j) = std::polar(1.0, -phi[j]);
  return u;
}

// P = <Phi|rho|Phi> for raw (unreduced) phases.
inline double pattern_value(const CMatrix& rho, const double* phi, int d) {
  const CVector u = phase_kets(phi, d);
  const Complex z = u.dot(rho * u);  // u^dagger rho u
  if (std::abs(z.imag()) > 1e-10)
    throw std::domain_error("evaluate_pattern: imaginary residue above tolerance (non-Hermitian input)");
  return z.real();
}

inline Eigen::VectorXd pattern_grad(const CMatrix& rho, const double* phi, int d) {
  const CVector u = phase_kets(phi, d);
  const CVector v = rho * u;
  Eigen::VectorXd g(d);
  for (int l = 0; l < d; ++l) g(l) = -2.0 * (std::conj(u(l)) * v(l)).imag();
  return g;
}
}  // namespace detail

/// Interference pattern P(rho, phi) = 1 + sum_{j != m} rho_jm e^{i(phi_j - phi_m)}.
inline double evaluate_pattern(const DensityMatrix& rho, const PhaseVector& phi) {
  detail::check_dims(rho, phi.size(), "evaluate_pattern");
  return detail::pattern_value(rho.matrix(), phi.values().data(), phi.size());
}

/// Analytic gradient dP/dphi_l; components sum to zero.
inline Eigen::VectorXd pattern_gradient(const DensityMatrix& rho, const PhaseVector& phi) {
  detail::check_dims(rho, phi.size(), "pattern_gradient");
  return detail::pattern_grad(rho.matrix(), phi.values().data(), phi.size());
}

struct PatternMaxResult {
  PhaseVector argmax;
  double value = 0.0;
  int restarts_used = 0;
  bool converged = false;
};

struct AscentOptions {
  double grad_tol = 1e-9;
  int max_iter = 10000;
};

namespace detail {
struct AscentOutcome {
  Eigen::VectorXd phi;
  double value;
  bool converged;
};

// Gradient ascent on phi_2..phi_d with phi_1 pinned to 0. Armijo backtracking,
// Barzilai-Borwein trial steps.
inline AscentOutcome ascend(const CMatrix& rho, Eigen::VectorXd phi, const AscentOptions& opt) {
  const int d = static_cast<int>(phi.size());
  phi(0) = 0.0;
  double f = pattern_value(rho, phi.data(), d);
  if (d == 1) return {phi, f, true};

  Eigen::VectorXd g = pattern_grad(rho, phi.data(), d);
  g(0) = 0.0;
  double step = 1.0;
  for (int it = 0; it < opt.max_iter; ++it) {
    const double gnorm2 = g.squaredNorm();
    if (std::sqrt(gnorm2) <= opt.grad_tol) return {phi, f, true};

    double t = step;
    Eigen::VectorXd trial;
    double ft = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = phi + t * g;
      ft = pattern_value(rho, trial.data(), d);
      if (ft >= f + 1e-4 * t * gnorm2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No ascent possible at double precision: treat as stationary.
      return {phi, f, std::sqrt(gnorm2) <= 1e3 * opt.grad_tol};
    }
    Eigen::VectorXd g_new = pattern_grad(rho, trial.data(), d);
    g_new(0) = 0.0;
    const Eigen::VectorXd s = trial - phi;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    // Ascent on f is descent on -f: BB1 step uses s.s / s.(-y).
    step = sy < 0.0 ? std::clamp(-s.squaredNorm() / sy, 1e-6, 1e6) : std::min(2.0 * t, 1e6);
    phi = std::move(trial);
    f = ft;
    g = std::move(g_new);
  }
  return {phi, f, g.norm() <= opt.grad_tol};
}
}  // namespace detail

/// Multistart gradient ascent for max_phi P(rho, phi). Start 0 is the origin,
/// the others are uniform on [0, 2 pi)^d from stream `seed`. The best value
/// wins; ties keep the earliest start.
inline PatternMaxResult find_pattern_max(const DensityMatrix& rho, int restarts, std::uint64_t seed,
                                         const AscentOptions& opt = {}) {
  if (restarts < 1) throw std::invalid_argument("find_pattern_max: restarts must be >= 1");
  const int d = rho.dim();
  Rng rng(stream_seed(seed, 0));
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);

  PatternMaxResult best;
  best.restarts_used = restarts;
  bool have = false;
  bool any_converged = false;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd start = Eigen::VectorXd::Zero(d);
    if (r > 0)
      for (int j = 1; j < d; ++j) start(j) = angle(rng);
    detail::AscentOutcome out = detail::ascend(rho.matrix(), std::move(start), opt);
    any_converged = any_converged || out.converged;
    if (!have || out.value > best.value) {
      best.value = out.value;
      best.argmax = PhaseVector(out.phi);
      have = true;
    }
  }
  best.converged = any_converged;
  return best;
}

}  // namespace cohmoment
