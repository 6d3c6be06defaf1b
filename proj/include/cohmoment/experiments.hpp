#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cohmoment/moments.hpp"
#include "cohmoment/parallel.hpp"
#include "cohmoment/pattern.hpp"
#include "cohmoment/polynomial.hpp"
#include "cohmoment/qstate.hpp"
#include "cohmoment/rng.hpp"
#include "cohmoment/thresholds.hpp"

namespace cohmoment {

/// Deviation between the distribution centers and the true pattern maximum.
/// Components are i.i.d. N(0, d/(d-1) sigma_g^2), so that after removing the
/// (irrelevant) mean the centered components have variance sigma_g^2.
struct DeviationModel {
  int d = 2;
  double sigma_g = 0.0;
  std::uint64_t seed = 0;
};

/// Raw (unwrapped) deviation vector. Draws d standard normals from `rng` and
/// scales them, so one stream yields paired draws across sigma_g values.
inline Eigen::VectorXd sample_deviation_raw(int d, double sigma_g, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_deviation: d must be >= 1");
  if (!std::isfinite(sigma_g) || sigma_g < 0.0)
    throw std::invalid_argument("sample_deviation: sigma_g must be finite and >= 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (int j = 0; j < d; ++j) z(j) = normal(rng);
  if (sigma_g == 0.0) return Eigen::VectorXd::Zero(d);
  if (d == 1) throw std::invalid_argument("sample_deviation: d must be >= 2 for sigma_g > 0");
  return sigma_g * std::sqrt(static_cast<double>(d) / (d - 1)) * z;
}

inline PhaseVector sample_deviation(const DeviationModel& model) {
  Rng rng(stream_seed(model.seed, 0));
  return PhaseVector(sample_deviation_raw(model.d, model.sigma_g, rng));
}

struct ExperimentConfig {
  int d = 7;
  int target_k = 7;
  std::vector<int> orders{1, 2, 3};
  std::vector<double> sigmas{0.0};
  std::vector<double> sigma_gs{0.0};
  int n_delta = 1000;
  EnsembleSpec ensemble{EnsembleKind::RhoAFamily, 7, 1, 0, 1};
  int restarts = 20;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void check() const {
    if (d < 2) throw std::invalid_argument("ExperimentConfig: d must be >= 2");
    if (target_k < 1 || target_k > d) throw std::invalid_argument("ExperimentConfig: target k must lie in [1, d]");
    if (orders.empty() || sigmas.empty() || sigma_gs.empty())
      throw std::invalid_argument("ExperimentConfig: grids must be non-empty");
    for (int n : orders)
      if (n < 1 || n > 3) throw std::invalid_argument("ExperimentConfig: moment orders must be in {1, 2, 3}");
    for (double s : sigmas)
      if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("ExperimentConfig: sigma must be >= 0");
    for (double s : sigma_gs)
      if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("ExperimentConfig: sigma_G must be >= 0");
    if (n_delta < 1) throw std::invalid_argument("ExperimentConfig: N_delta must be >= 1");
    if (restarts < 1) throw std::invalid_argument("ExperimentConfig: restarts must be >= 1");
    if (ensemble.dim != d) throw std::invalid_argument("ExperimentConfig: ensemble dimension differs from d");
    ensemble.check();
  }

  /// Stable text form of every field that affects results (threads excluded).
  std::string canonical() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "d=" << d << ";k=" << target_k << ";orders=";
    for (int n : orders) os << n << ',';
    os << ";sigmas=";
    for (double s : sigmas) os << s << ',';
    os << ";sigma_gs=";
    for (double s : sigma_gs) os << s << ',';
    os << ";n_delta=" << n_delta << ";ensemble=" << static_cast<int>(ensemble.kind) << '/' << ensemble.size << '/'
       << ensemble.seed << '/' << ensemble.k << ";restarts=" << restarts << ";seed=" << seed;
    return os.str();
  }
};

/// FNV-1a, 64 bit, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct DetectionRow {
  int n = 1;
  double sigma = 0.0;
  double sigma_g = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  int n_delta = 0;
};

struct DetectionReport {
  int target_k = 1;
  std::vector<DetectionRow> rows;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string timestamp;

  const DetectionRow& at(int n, double sigma, double sigma_g) const {
    for (const auto& r : rows)
      if (r.n == n && std::abs(r.sigma - sigma) < 1e-12 && std::abs(r.sigma_g - sigma_g) < 1e-12) return r;
    throw std::out_of_range("DetectionReport: no row for the requested (n, sigma, sigma_G)");
  }
};

namespace detail {

struct MeanAccumulator {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double x) {
    n += 1.0;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  double std_error() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

// Cell layout shared by both experiments: (order, sigma_g, sigma).
struct Grid {
  std::size_t orders, sigma_gs, sigmas;
  std::size_t size() const { return orders * sigma_gs * sigmas; }
  std::size_t at(std::size_t o, std::size_t g, std::size_t s) const { return (o * sigma_gs + g) * sigmas + s; }
};

inline DetectionReport make_report(const ExperimentConfig& cfg, int target_k, const Grid& grid,
                                   const std::vector<std::vector<double>>& samples) {
  DetectionReport rep;
  rep.target_k = target_k;
  rep.config_hash = fnv1a_hex(cfg.canonical());
  rep.seed = cfg.seed;
  rep.timestamp = utc_timestamp();
  for (std::size_t o = 0; o < grid.orders; ++o)
    for (std::size_t g = 0; g < grid.sigma_gs; ++g)
      for (std::size_t s = 0; s < grid.sigmas; ++s) {
        MeanAccumulator acc;
        for (const auto& draw : samples) acc.add(draw[grid.at(o, g, s)]);
        rep.rows.push_back({cfg.orders[o], cfg.sigmas[s], cfg.sigma_gs[g], acc.mean, acc.std_error(), cfg.n_delta});
      }
  return rep;
}

}  // namespace detail

/// Average detection ratio for the rho_a family: for each deviation draw the
/// centers are mu = delta (the pattern maximum of rho_a is at 0), Q_n(rho_a) is
/// a degree-n polynomial in a, and R is the exact measure of
/// {a in [0, 1] : Q_n(rho_a) > Q_n^{(k-1)}(sigma)}.
inline DetectionReport detection_ratio_rho_a(const ExperimentConfig& cfg) {
  cfg.check();
  if (cfg.ensemble.kind != EnsembleKind::RhoAFamily)
    throw std::invalid_argument("detection_ratio_rho_a: ensemble must be the rho_a family");
  const int d = cfg.d;
  const DensityMatrix incoherent = maximally_mixed(d);
  const DensityMatrix coherent = rho_a(d, 1.0);

  std::vector<AffineMomentFamily> families;
  for (int n : cfg.orders) families.emplace_back(incoherent, coherent, n);

  const detail::Grid grid{cfg.orders.size(), cfg.sigma_gs.size(), cfg.sigmas.size()};
  std::vector<std::vector<double>> levels(cfg.orders.size(), std::vector<double>(cfg.sigmas.size()));
  for (std::size_t o = 0; o < cfg.orders.size(); ++o)
    for (std::size_t s = 0; s < cfg.sigmas.size(); ++s)
      levels[o][s] = cfg.target_k >= 2 ? threshold(cfg.orders[o], cfg.target_k - 1, cfg.sigmas[s]) : 0.0;

  std::vector<std::vector<double>> samples(static_cast<std::size_t>(cfg.n_delta), std::vector<double>(grid.size()));
  parallel_for(samples.size(), cfg.threads, [&](std::size_t t) {
    Rng rng(stream_seed(cfg.seed, t));
    Rng paired = rng;
    for (std::size_t g = 0; g < grid.sigma_gs; ++g) {
      Rng draw = paired;  // same normals for every sigma_G
      const PhaseVector mu(sample_deviation_raw(d, cfg.sigma_gs[g], draw));
      for (std::size_t o = 0; o < grid.orders; ++o) {
        const Eigen::MatrixXd prepared = families[o].prepare(mu);
        for (std::size_t s = 0; s < grid.sigmas; ++s) {
          double r = 1.0;
          if (cfg.target_k >= 2)
            r = measure_above(AffineMomentFamily::coefficients(prepared, cfg.sigmas[s]), levels[o][s], 0.0, 1.0);
          samples[t][grid.at(o, g, s)] = r;
        }
      }
    }
  });
  return detail::make_report(cfg, cfg.target_k, grid, samples);
}

/// Detection ratio for a CUE random-state ensemble at several target k in one
/// pass. For every state the pattern maximum is located once; each deviation
/// draw sets mu = phi_max + delta, and a state counts as detected at target k
/// when its certified coherence number is >= k. R is the detected fraction of
/// the ensemble, averaged over N_delta draws.
inline std::map<int, DetectionReport> detection_ratio_random_multi(const ExperimentConfig& cfg,
                                                                  const std::vector<int>& targets) {
  cfg.check();
  if (cfg.ensemble.kind != EnsembleKind::CueRandom)
    throw std::invalid_argument("detection_ratio_random: ensemble must be cue_random");
  for (int k : targets)
    if (k < 1 || k > cfg.d) throw std::invalid_argument("detection_ratio_random: target k outside [1, d]");

  const int d = cfg.d;
  const std::size_t members = static_cast<std::size_t>(cfg.ensemble.size);
  const std::size_t draws = static_cast<std::size_t>(cfg.n_delta);
  const detail::Grid grid{cfg.orders.size(), cfg.sigma_gs.size(), cfg.sigmas.size()};
  const std::size_t nk = targets.size();

  // thresholds per (order, sigma, target)
  std::vector<double> level(grid.orders * grid.sigmas * nk);
  for (std::size_t o = 0; o < grid.orders; ++o)
    for (std::size_t s = 0; s < grid.sigmas; ++s)
      for (std::size_t q = 0; q < nk; ++q)
        level[(o * grid.sigmas + s) * nk + q] =
            targets[q] >= 2 ? threshold(cfg.orders[o], targets[q] - 1, cfg.sigmas[s]) : -1.0;

  // detected[m][(t * cells + cell) * nk + q]
  std::vector<std::vector<std::uint8_t>> detected(members);
  parallel_for(members, cfg.threads, [&](std::size_t m) {
    Rng state_rng(stream_seed(cfg.ensemble.seed, 0, m));
    const DensityMatrix rho = sample_random_state(d, state_rng);
    const PatternMaxResult peak = find_pattern_max(rho, cfg.restarts, stream_seed(cfg.seed, 1, m));
    std::vector<MomentExpansion> expansions;
    for (int n : cfg.orders) expansions.emplace_back(rho, n);

    auto& out = detected[m];
    out.assign(draws * grid.size() * nk, 0);
    for (std::size_t t = 0; t < draws; ++t) {
      const Rng base(stream_seed(cfg.seed, 2 + m, t));
      for (std::size_t g = 0; g < grid.sigma_gs; ++g) {
        Rng draw = base;
        const PhaseVector mu =
            peak.argmax + PhaseVector(sample_deviation_raw(d, cfg.sigma_gs[g], draw));
        for (std::size_t o = 0; o < grid.orders; ++o) {
          const std::vector<double> poly = expansions[o].sigma_polynomial(mu);
          for (std::size_t s = 0; s < grid.sigmas; ++s) {
            const double q = horner(poly, std::exp(-cfg.sigmas[s] * cfg.sigmas[s]));
            for (std::size_t k = 0; k < nk; ++k)
              out[(t * grid.size() + grid.at(o, g, s)) * nk + k] = exceeds_threshold(q, level[(o * grid.sigmas + s) * nk + k]) ? 1 : 0;
          }
        }
      }
    }
  });

  std::map<int, DetectionReport> reports;
  for (std::size_t k = 0; k < nk; ++k) {
    std::vector<std::vector<double>> samples(draws, std::vector<double>(grid.size(), 0.0));
    for (std::size_t t = 0; t < draws; ++t)
      for (std::size_t c = 0; c < grid.size(); ++c) {
        std::size_t hits = 0;
        for (std::size_t m = 0; m < members; ++m) hits += detected[m][(t * grid.size() + c) * nk + k];
        samples[t][c] = static_cast<double>(hits) / static_cast<double>(members);
      }
    reports.emplace(targets[k], detail::make_report(cfg, targets[k], grid, samples));
  }
  return reports;
}

inline DetectionReport detection_ratio_random(const ExperimentConfig& cfg) {
  return detection_ratio_random_multi(cfg, {cfg.target_k}).at(cfg.target_k);
}

struct RStatistic {
  int n = 1;
  double r = 0.0;          // <R>_n^max / <R>_ref (NaN when the reference is 0)
  double sigma_max = 0.0;  // argmax over the sigma grid, ties to the smaller sigma
  double max_mean = 0.0;
  double reference = 0.0;
};

/// <R>_ref: the first-moment detection ratio at sigma_g (taken at the smallest
/// sigma of the grid; the Q_1 verdict does not depend on sigma).
inline double reference_ratio(const DetectionReport& reference, double sigma_g) {
  const DetectionRow* best = nullptr;
  for (const auto& r : reference.rows)
    if (r.n == 1 && std::abs(r.sigma_g - sigma_g) < 1e-12 && (best == nullptr || r.sigma < best->sigma)) best = &r;
  if (best == nullptr) throw std::invalid_argument("reference_ratio: reference report has no n = 1 rows at sigma_G");
  return best->mean;
}

/// r_n for every order in `report` at sigma_g, relative to the first-moment
/// reference.
inline std::vector<RStatistic> r_statistics(const DetectionReport& report, const DetectionReport& reference,
                                            double sigma_g) {
  const double ref = reference_ratio(reference, sigma_g);
  std::map<int, std::vector<const DetectionRow*>> curves;
  for (const auto& r : report.rows)
    if (std::abs(r.sigma_g - sigma_g) < 1e-12) curves[r.n].push_back(&r);
  if (curves.empty()) throw std::invalid_argument("r_statistics: empty sigma grid");

  std::vector<RStatistic> out;
  for (auto& [n, rows] : curves) {
    std::sort(rows.begin(), rows.end(), [](const DetectionRow* a, const DetectionRow* b) { return a->sigma < b->sigma; });
    RStatistic st;
    st.n = n;
    st.reference = ref;
    st.max_mean = rows.front()->mean;
    st.sigma_max = rows.front()->sigma;
    for (const DetectionRow* r : rows)
      if (r->mean > st.max_mean) {
        st.max_mean = r->mean;
        st.sigma_max = r->sigma;
      }
    st.r = ref > 0.0 ? st.max_mean / ref : std::numeric_limits<double>::quiet_NaN();
    out.push_back(st);
  }
  return out;
}

inline std::vector<RStatistic> r_statistics(const DetectionReport& report, double sigma_g) {
  return r_statistics(report, report, sigma_g);
}

struct PurityCurveRow {
  int k = 0;
  double purity = 0.0;
  double constrained_max = 0.0;  // best Q_2 over at-most-k-coherent states of this purity
  double global_max = 0.0;       // Q_2 of the purity-P maximizer
  double pure_threshold = 0.0;   // Q_2^{(k)} for pure states
};

inline std::vector<PurityCurveRow> purity_curve(int d, const std::vector<int>& ks, double sigma,
                                                const std::vector<double>& purities, int budget,
                                                std::uint64_t seed, unsigned threads = 1) {
  if (d < 2) throw std::invalid_argument("purity_curve: d must be >= 2");
  std::vector<PurityCurveRow> rows;
  for (std::size_t ki = 0; ki < ks.size(); ++ki)
    for (std::size_t pi = 0; pi < purities.size(); ++pi) {
      const int k = ks[ki];
      const double p = purities[pi];
      ConstrainedMaxOptions opt;
      opt.budget = budget;
      opt.threads = threads;
      PurityCurveRow row;
      row.k = k;
      row.purity = p;
      row.constrained_max =
          purity_constrained_max_q2_detail(d, k, p, sigma, stream_seed(seed, static_cast<std::uint64_t>(k), pi), opt).value;
      row.global_max = purity_bound_q2(d, p, sigma);
      row.pure_threshold = threshold(2, k, sigma);
      rows.push_back(row);
    }
  return rows;
}

}  // namespace cohmoment
