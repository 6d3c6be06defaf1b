#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace cohmoment {

/// Coefficients are stored lowest order first: p(x) = c[0] + c[1] x + ...
inline double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

inline std::vector<double> derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(static_cast<double>(i) * c[i]);
  return d;
}

/// Real roots of p strictly inside (lo, hi), ascending. Critical points come
/// from the derivative recursively; each monotone piece with a sign change is
/// bisected to machine resolution.
inline std::vector<double> roots_in_interval(const std::vector<double>& c, double lo, double hi) {
  if (c.size() <= 1) return {};
  std::vector<double> breaks{lo};
  for (double r : roots_in_interval(derivative(c), lo, hi)) breaks.push_back(r);
  breaks.push_back(hi);

  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double a = breaks[i];
    double b = breaks[i + 1];
    double fa = horner(c, a);
    const double fb = horner(c, b);
    if (fa == 0.0) {
      if (a > lo && (roots.empty() || roots.back() != a)) roots.push_back(a);
      continue;
    }
    if (fb == 0.0 || (fa < 0.0) == (fb < 0.0)) continue;
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      const double m = 0.5 * (a + b);
      if (m <= a || m >= b) break;
      const double fm = horner(c, m);
      if (fm == 0.0) {
        a = b = m;
        break;
      }
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  // interior roots on piece boundaries
  for (std::size_t i = 1; i + 1 < breaks.size(); ++i)
    if (horner(c, breaks[i]) == 0.0) roots.push_back(breaks[i]);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

/// Lebesgue measure of { x in [lo, hi] : p(x) > level }.
inline double measure_above(std::vector<double> c, double level, double lo = 0.0, double hi = 1.0) {
  if (!(hi >= lo)) throw std::invalid_argument("measure_above: empty interval");
  if (c.empty()) c.push_back(0.0);
  c[0] -= level;
  std::vector<double> pts{lo};
  for (double r : roots_in_interval(c, lo, hi)) pts.push_back(r);
  pts.push_back(hi);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i];
    const double b = pts[i + 1];
    if (b <= a) continue;
    if (horner(c, 0.5 * (a + b)) > 0.0) total += b - a;
  }
  return total;
}

/// Coefficients of the polynomial of degree nodes.size()-1 through
/// (nodes[i], values[i]).
inline std::vector<double> vandermonde_solve(const std::vector<double>& nodes, const std::vector<double>& values) {
  const auto m = static_cast<Eigen::Index>(nodes.size());
  if (m == 0 || values.size() != nodes.size())
    throw std::invalid_argument("vandermonde_solve: need matching, non-empty nodes and values");
  Eigen::MatrixXd v(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double p = 1.0;
    for (Eigen::Index j = 0; j < m; ++j, p *= nodes[static_cast<std::size_t>(i)]) v(i, j) = p;
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(values.data(), m);
  const Eigen::VectorXd sol = v.fullPivLu().solve(rhs);
  return {sol.data(), sol.data() + m};
}

/// Inverse of the Vandermonde matrix on `nodes` (row p maps node values to
/// the coefficient of x^p).
inline Eigen::MatrixXd vandermonde_inverse(const std::vector<double>& nodes) {
  const auto m = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd v(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double p = 1.0;
    for (Eigen::Index j = 0; j < m; ++j, p *= nodes[static_cast<std::size_t>(i)]) v(i, j) = p;
  }
  return v.fullPivLu().inverse();
}

}  // namespace cohmoment
