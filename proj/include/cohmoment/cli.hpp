#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohmoment/experiments.hpp"
#include "cohmoment/io.hpp"
#include "cohmoment/moments.hpp"
#include "cohmoment/pattern.hpp"
#include "cohmoment/qstate.hpp"
#include "cohmoment/thresholds.hpp"
#include "cohmoment/verify.hpp"

namespace cohmoment::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kCheckFailed = 2 };

/// Raw flag values as typed by the user; empty optionals were not given.
struct Flags {
  std::optional<std::string> state, config, out, mu, sigma, sigma_g, n, k, d, purity, budget, states;
  std::optional<std::uint64_t> seed;
  std::optional<long long> samples, restarts;
  unsigned threads = 1;
  bool oracle = false;
};

// ---- moment ---------------------------------------------------------------

inline int cmd_moment(const Flags& f, std::ostream& out) {
  if (!f.state) throw InputError("moment: --state is required");
  const DensityMatrix rho = read_state_file(*f.state);
  const int d = rho.dim();
  const int n = f.n ? static_cast<int>(parse_int(*f.n, "--n")) : 1;
  const double sigma = f.sigma ? parse_double(*f.sigma, "--sigma") : 0.0;
  std::vector<double> mu(static_cast<std::size_t>(d), 0.0);
  if (f.mu) {
    mu = parse_grid(*f.mu, "--mu");
    if (static_cast<int>(mu.size()) != d)
      throw InputError("moment: --mu needs " + std::to_string(d) + " angles, got " + std::to_string(mu.size()));
  }
  const MomentRequest req(n, WrappedNormalSpec(PhaseVector(mu), sigma));
  const double q = generalized_moment(rho, req);
  out << "Q_" << n << " = " << fmt(q) << '\n';
  if (!f.oracle) return kOk;

  const auto samples = static_cast<std::size_t>(f.samples.value_or(1000000));
  const McEstimate mc = mc_oracle(rho, req, samples, f.seed.value_or(1), f.threads);
  const double z = oracle_discrepancy(q, mc);
  const bool pass = z <= 4.0;
  out << "monte_carlo = " << fmt(mc.estimate) << " +/- " << fmt(mc.std_error) << " (" << mc.samples << " samples)\n";
  out << "discrepancy = " << fmt(z) << " stderr: " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kOk : kCheckFailed;
}

// ---- certify --------------------------------------------------------------

inline int cmd_certify(const Flags& f, std::ostream& out) {
  if (!f.state) throw InputError("certify: --state is required");
  const DensityMatrix rho = read_state_file(*f.state);
  const int d = rho.dim();
  const int n = f.n ? static_cast<int>(parse_int(*f.n, "--n")) : 2;
  const double sigma = f.sigma ? parse_double(*f.sigma, "--sigma") : 0.0;
  const int restarts = static_cast<int>(f.restarts.value_or(20));
  if (restarts < 1) throw InputError("certify: --restarts must be >= 1");
  if (n < 1 || n > 3) throw InputError("certify: --n must be 1, 2 or 3");

  const PatternMaxResult peak = find_pattern_max(rho, restarts, f.seed.value_or(1));
  const double q = generalized_moment(rho, peak.argmax, sigma, n);
  const CoherenceVerdict v = certify(q, n, sigma, d);

  out << "phi_max = " << join(peak.argmax.to_vector()) << '\n';
  out << "P(phi_max) = " << fmt(peak.value) << '\n';
  out << "Q_" << n << " = " << fmt(q) << " (sigma = " << fmt(sigma) << ")\n";
  out << "certified_k = " << v.certified_k << '\n';
  out << "margin = " << (v.margin ? fmt(*v.margin) : std::string("n/a")) << '\n';
  out << "k,threshold,exceeded\n";
  for (int k = 1; k <= d; ++k) {
    const double t = threshold(n, k, sigma);
    out << k << ',' << fmt(t) << ',' << (exceeds_threshold(q, t) ? "yes" : "no") << '\n';
  }
  return kOk;
}

// ---- thresholds -----------------------------------------------------------

inline std::string thresholds_csv(const std::vector<int>& orders, int max_k, const std::string& manifest_hash) {
  CsvWriter w({"n", "k", "l", "v"});
  w.meta("manifest_hash", manifest_hash);
  w.meta("seed", "0");
  for (int n : orders) {
    const ThresholdTable t = threshold_table(n, max_k);
    for (int k = 1; k <= max_k; ++k)
      for (int l = 0; l <= n * n; ++l)
        w.row({std::to_string(n), std::to_string(k), std::to_string(l), std::to_string(t.at(k, l))});
  }
  return w.str();
}

inline int cmd_thresholds(const Flags& f, std::ostream& out) {
  const std::vector<int> orders = f.n ? parse_int_list(*f.n, "--n") : std::vector<int>{1, 2, 3};
  for (int n : orders)
    if (n < 1 || n > 3) throw InputError("thresholds: --n values must be 1, 2 or 3");
  const int max_k = f.k ? static_cast<int>(parse_int(*f.k, "--k")) : 10;
  if (max_k < 1) throw InputError("thresholds: --k must be >= 1");

  RunManifest m;
  m.command = "thresholds";
  m.resolved_config = "n = " + join(orders) + "\nk = " + std::to_string(max_k) + "\n";
  const std::string csv = thresholds_csv(orders, max_k, m.hash());
  if (f.out) {
    std::ofstream file(*f.out, std::ios::binary);
    if (!file) throw InputError("cannot write '" + *f.out + "'");
    file << csv;
    out << "wrote " << *f.out << '\n';
  } else {
    out << csv;
  }
  return kOk;
}

// ---- experiment -----------------------------------------------------------

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig3", "fig4", "fig5", "table3"};
  return names;
}

/// Defaults for each preset, as config text.
inline KeyValueConfig preset_defaults(const std::string& preset) {
  std::string text = "schema = 1\npreset = " + preset + "\nseed = 1\n";
  if (preset == "fig3")
    text += "d = 7\nk = 7\nn = 3\nsigma = 0:1.2:0.1\nsigma_g = 0:0.6:0.05\nsamples = 1000\n";
  else if (preset == "fig4")
    text += "d = 7\nk = 7\nn = 1,2,3\nsigma = 0:1.5:0.05\nsigma_g = 0.4\nsamples = 1000\n";
  else if (preset == "fig5")
    text += "d = 5\nk = 2,3,4,5\nsigma = 1\npurity = 0.2:1:0.05\nbudget = 50\n";
  else if (preset == "table3")
    text += "d = 7\nk = 4,5,6\nn = 1,2,3\nsigma = 0:1.5:0.1\nsigma_g = 0,0.3,0.8\nsamples = 25\nstates = 500\nrestarts = 20\n";
  else
    throw InputError("experiment: unknown preset '" + preset + "' (fig3, fig4, fig5, table3)");
  return KeyValueConfig::parse(text, preset);
}

/// Preset defaults, then the config file, then command-line flags.
inline KeyValueConfig resolve_config(const std::string& preset, const Flags& f) {
  KeyValueConfig cfg = preset_defaults(preset);
  if (f.config) {
    const KeyValueConfig file = KeyValueConfig::load(*f.config);
    for (const auto& [k, v] : file.values()) {
      if (k == "preset" && v != preset) throw InputError("config file is for preset '" + v + "', not '" + preset + "'");
      if (!cfg.has(k) && k != "preset") throw InputError("config key '" + k + "' does not apply to preset " + preset);
      cfg.set(k, v);
    }
  }
  auto over = [&](const char* key, const std::optional<std::string>& v) {
    if (!v) return;
    if (!cfg.has(key)) throw InputError(std::string("--") + key + " does not apply to preset " + preset);
    cfg.set(key, *v);
  };
  over("d", f.d);
  over("k", f.k);
  over("n", f.n);
  over("sigma", f.sigma);
  over("sigma_g", f.sigma_g);
  over("purity", f.purity);
  over("budget", f.budget);
  over("states", f.states);
  if (f.samples) over("samples", std::to_string(*f.samples));
  if (f.restarts) over("restarts", std::to_string(*f.restarts));
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  return cfg;
}

inline std::uint64_t config_seed(const KeyValueConfig& cfg) {
  const long long s = parse_int(cfg.get("seed"), "seed");
  if (s < 0) throw InputError("seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

inline ExperimentConfig detection_config(const KeyValueConfig& cfg, unsigned threads) {
  ExperimentConfig c;
  c.d = static_cast<int>(parse_int(cfg.get("d"), "d"));
  c.orders = parse_int_list(cfg.get("n"), "n");
  c.sigmas = parse_grid(cfg.get("sigma"), "sigma");
  c.sigma_gs = parse_grid(cfg.get("sigma_g"), "sigma_g");
  c.n_delta = static_cast<int>(parse_int(cfg.get("samples"), "samples"));
  c.seed = config_seed(cfg);
  c.threads = threads;
  const std::vector<int> ks = parse_int_list(cfg.get("k"), "k");
  c.target_k = ks.front();
  if (cfg.has("states")) {
    c.ensemble = {EnsembleKind::CueRandom, c.d, static_cast<int>(parse_int(cfg.get("states"), "states")), c.seed, 1};
    c.restarts = static_cast<int>(parse_int(cfg.get("restarts"), "restarts"));
  } else {
    c.ensemble = {EnsembleKind::RhoAFamily, c.d, 1, c.seed, 1};
  }
  try {
    c.check();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return c;
}

struct ExperimentOutput {
  RunManifest manifest;
  std::map<std::string, std::string> files;  // file name -> contents
};

inline ExperimentOutput run_preset(const std::string& preset, const Flags& f, std::ostream& log) {
  const KeyValueConfig cfg = resolve_config(preset, f);
  ExperimentOutput res;
  RunManifest& m = res.manifest;
  m.command = "experiment " + preset;
  m.config_path = f.config.value_or("");
  m.resolved_config = cfg.canonical();
  m.seed = config_seed(cfg);
  const std::string hash = m.hash();

  if (preset == "fig3" || preset == "fig4") {
    const ExperimentConfig c = detection_config(cfg, f.threads);
    log << preset << ": rho_a family, d = " << c.d << ", " << c.sigmas.size() << " x " << c.sigma_gs.size()
        << " grid, N_delta = " << c.n_delta << '\n';
    const DetectionReport rep = detection_ratio_rho_a(c);
    res.files[preset + ".csv"] = detection_csv(rep, hash).str();
    res.files[preset + ".json"] = detection_json(rep, c, hash).dump(2) + "\n";
  } else if (preset == "fig5") {
    const int d = static_cast<int>(parse_int(cfg.get("d"), "d"));
    const std::vector<int> ks = parse_int_list(cfg.get("k"), "k");
    const std::vector<double> sig = parse_grid(cfg.get("sigma"), "sigma");
    if (sig.size() != 1) throw InputError("fig5: sigma must be a single value");
    std::vector<double> ps = parse_grid(cfg.get("purity"), "purity");
    for (int k : ks) {
      if (k < 1 || k > d) throw InputError("fig5: k outside [1, d]");
      ps.push_back(std::stod(fmt(critical_purity(d, k))));
    }
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), ps.end());
    for (double p : ps)
      if (p < 1.0 / d - 1e-12 || p > 1.0 + 1e-12) throw InputError("fig5: purity outside [1/d, 1]");
    const int budget = static_cast<int>(parse_int(cfg.get("budget"), "budget"));
    log << "fig5: d = " << d << ", sigma = " << fmt(sig[0]) << ", " << ks.size() << " k values x " << ps.size()
        << " purities, budget " << budget << '\n';
    const auto rows = purity_curve(d, ks, sig[0], ps, budget, m.seed, f.threads);
    CsvWriter w({"k", "purity", "constrained_max", "global_max", "pure_threshold", "critical_purity"});
    w.meta("manifest_hash", hash);
    w.meta("seed", std::to_string(m.seed));
    for (const auto& r : rows)
      w.row({std::to_string(r.k), fmt(r.purity), fmt(r.constrained_max), fmt(r.global_max), fmt(r.pure_threshold),
             fmt(critical_purity(d, r.k))});
    res.files["fig5.csv"] = w.str();
  } else if (preset == "table3") {
    ExperimentConfig c = detection_config(cfg, f.threads);
    const std::vector<int> ks = parse_int_list(cfg.get("k"), "k");
    bool has_zero = false;
    for (double g : c.sigma_gs) has_zero = has_zero || g == 0.0;
    bool has_zero_sigma = false;
    for (double s : c.sigmas) has_zero_sigma = has_zero_sigma || s == 0.0;
    if (!has_zero || !has_zero_sigma) throw InputError("table3: sigma and sigma_g grids must contain 0");
    log << "table3: " << c.ensemble.size << " random states, d = " << c.d << ", N_delta = " << c.n_delta << '\n';
    std::map<int, DetectionReport> reps;
    try {
      reps = detection_ratio_random_multi(c, ks);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
    CsvWriter w({"k", "sigma_G", "R_opt", "R_ref", "r_2", "r_3", "sigma_max_2", "sigma_max_3"});
    w.meta("manifest_hash", hash);
    w.meta("config_hash", reps.begin()->second.config_hash);
    w.meta("seed", std::to_string(m.seed));
    w.meta("d", std::to_string(c.d));
    for (const auto& [k, rep] : reps) {
      res.files["table3_k" + std::to_string(k) + ".csv"] = detection_csv(rep, hash).str();
      const double opt = rep.at(1, 0.0, 0.0).mean;
      for (double g : c.sigma_gs) {
        if (g == 0.0) continue;
        std::map<int, RStatistic> by_n;
        for (const auto& st : r_statistics(rep, g)) by_n[st.n] = st;
        auto cell = [&](int n, bool sigma_col) {
          if (!by_n.count(n)) return std::string("");
          return sigma_col ? fmt(by_n[n].sigma_max) : fmt(by_n[n].r);
        };
        w.row({std::to_string(k), fmt(g), fmt(opt), fmt(reference_ratio(rep, g)), cell(2, false), cell(3, false),
               cell(2, true), cell(3, true)});
      }
    }
    res.files["table3.csv"] = w.str();
  }

  for (const auto& [name, body] : res.files) m.outputs.push_back(name);
  res.files["manifest.json"] = m.to_json().dump(2) + "\n";
  return res;
}

inline int cmd_experiment(const std::string& preset, const Flags& f, std::ostream& out, std::ostream& log) {
  const std::filesystem::path dir = f.out.value_or(".");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw InputError("output directory '" + dir.string() + "' is not writable");
  const ExperimentOutput res = run_preset(preset, f, log);
  for (const auto& [name, body] : res.files) {
    const auto path = dir / name;
    std::ofstream file(path, std::ios::binary);
    if (!file) throw InputError("cannot write '" + path.string() + "'");
    file << body;
    out << "wrote " << path.string() << '\n';
  }
  return kOk;
}

// ---- verify ---------------------------------------------------------------

inline int cmd_verify(const std::string& scope, const Flags& f, std::ostream& out, VerifyOptions opt = {}) {
  if (f.seed) opt.seed = *f.seed;
  if (f.samples) opt.schur_samples = static_cast<int>(*f.samples);
  opt.threads = f.threads;
  const auto results = run_verify(scope, opt);
  bool all = true;
  out << "status,check,detail\n";
  for (const auto& r : results) {
    out << (r.passed ? "PASS" : "FAIL") << ',' << r.name << ',' << r.detail << '\n';
    all = all && r.passed;
  }
  return all ? kOk : kCheckFailed;
}

}  // namespace cohmoment::cli
