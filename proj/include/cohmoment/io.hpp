#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohmoment/experiments.hpp"
#include "cohmoment/qstate.hpp"

namespace cohmoment {

#ifndef COHMOMENT_VERSION
#define COHMOMENT_VERSION "0.1.0"
#endif

inline constexpr const char* kVersion = COHMOMENT_VERSION;
inline constexpr int kConfigSchema = 1;

/// Malformed input files and config values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- state files ----------------------------------------------------------

inline nlohmann::json state_to_json(const DensityMatrix& rho) {
  const int d = rho.dim();
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (int i = 0; i < d; ++i) {
    nlohmann::json rr = nlohmann::json::array(), ii = nlohmann::json::array();
    for (int j = 0; j < d; ++j) {
      rr.push_back(rho(i, j).real());
      ii.push_back(rho(i, j).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  return {{"dim", d}, {"re", re}, {"im", im}};
}

/// Parses {"dim": d, "re": [[...]], "im": [[...]]} and validates the matrix.
/// Shape problems raise InputError; physical violations raise StateError.
inline DensityMatrix state_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re") || !j.contains("im"))
    throw InputError("state file: expected an object with keys dim, re, im");
  if (!j["dim"].is_number_integer() || j["dim"].get<int>() < 1) throw InputError("state file: dim must be a positive integer");
  const int d = j["dim"].get<int>();
  CMatrix m(d, d);
  for (const char* key : {"re", "im"}) {
    const auto& rows = j[key];
    if (!rows.is_array() || static_cast<int>(rows.size()) != d)
      throw InputError(std::string("state file: '") + key + "' must have dim rows");
    for (int r = 0; r < d; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != d)
        throw InputError(std::string("state file: '") + key + "' row " + std::to_string(r) + " must have dim entries");
      for (int c = 0; c < d; ++c) {
        const auto& v = row[static_cast<std::size_t>(c)];
        if (!v.is_number()) throw InputError(std::string("state file: non-numeric entry in '") + key + "'");
        const double x = v.get<double>();
        if (key[0] == 'r')
          m(r, c) = Complex(x, 0.0);
        else
          m(r, c) += Complex(0.0, x);
      }
    }
  }
  return DensityMatrix::validate(std::move(m));
}

inline DensityMatrix read_state_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open state file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("state file '" + path + "' is not valid JSON: " + e.what());
  }
  return state_from_json(j);
}

inline void write_state_file(const std::string& path, const DensityMatrix& rho) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << state_to_json(rho).dump(2) << '\n';
}

// ---- numbers and lists ----------------------------------------------------

/// 12 significant digits, shortest of fixed/scientific, '.' decimal point.
inline std::string fmt(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(12) << x;
  return os.str();
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(v)) throw InputError(what + ": '" + text + "' is not a finite number");
  return v;
}

inline long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw InputError(what + ": '" + text + "' is not an integer");
  return v;
}

/// "a,b,c" or "start:stop:step" (inclusive; grid points are start + i*step,
/// rounded to 12 digits so 0.1 steps print cleanly).
inline std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.find(':') != std::string::npos) {
    const auto parts = split(t, ':');
    if (parts.size() != 3) throw InputError(what + ": range must be start:stop:step");
    const double a = parse_double(parts[0], what), b = parse_double(parts[1], what), h = parse_double(parts[2], what);
    if (!(h > 0.0) || b < a) throw InputError(what + ": range needs step > 0 and stop >= start");
    std::vector<double> out;
    const auto count = static_cast<long long>(std::floor((b - a) / h + 1e-9));
    for (long long i = 0; i <= count; ++i) out.push_back(std::stod(fmt(a + static_cast<double>(i) * h)));
    return out;
  }
  std::vector<double> out;
  for (const auto& p : split(t, ',')) out.push_back(parse_double(p, what));
  if (out.empty()) throw InputError(what + ": empty list");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& p : split(trim(text), ',')) out.push_back(static_cast<int>(parse_int(p, what)));
  if (out.empty()) throw InputError(what + ": empty list");
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// ---- config files ---------------------------------------------------------

/// Flat key = value text, '#' comments, required first key `schema = 1`.
/// Keys are kept sorted so the resolved form is canonical.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "config") {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    bool schema_seen = false;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InputError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw InputError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (key == "schema") {
        if (parse_int(value, "schema") != kConfigSchema)
          throw InputError(origin + ": unsupported schema version '" + value + "'");
        schema_seen = true;
        continue;
      }
      cfg.values_[key] = value;
    }
    if (!schema_seen) throw InputError(origin + ": missing 'schema = " + std::to_string(kConfigSchema) + "'");
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const { return values_.at(key); }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string canonical() const {
    std::string s = "schema = " + std::to_string(kConfigSchema) + "\n";
    for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
    return s;
  }

 private:
  std::map<std::string, std::string> values_;
};

// ---- manifest and CSV -----------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string resolved_config;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string version = kVersion;

  /// Hash of everything that determines the numbers (paths excluded).
  std::string hash() const {
    return fnv1a_hex(command + "\n" + resolved_config + "\nseed=" + std::to_string(seed) + "\nversion=" + version);
  }

  nlohmann::json to_json() const {
    return {{"command", command}, {"config_path", config_path}, {"resolved_config", resolved_config},
            {"seed", seed},       {"outputs", outputs},         {"version", version},
            {"hash", hash()}};
  }
};

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw std::logic_error("CsvWriter: row width differs from header");
    rows_.push_back(cells);
  }

  std::string str() const {
    std::string s;
    for (const auto& [k, v] : meta_) s += "# " + k + "=" + v + "\n";
    s += line(header_);
    for (const auto& r : rows_) s += line(r);
    return s;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << str();
  }

 private:
  static std::string line(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
    return s + "\n";
  }

  std::vector<std::string> header_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::vector<std::string>> rows_;
};

inline CsvWriter detection_csv(const DetectionReport& rep, const std::string& manifest_hash) {
  CsvWriter w({"n", "sigma", "sigma_G", "R_mean", "R_stderr", "N_delta"});
  w.meta("manifest_hash", manifest_hash);
  w.meta("config_hash", rep.config_hash);
  w.meta("seed", std::to_string(rep.seed));
  w.meta("target_k", std::to_string(rep.target_k));
  for (const auto& r : rep.rows)
    w.row({std::to_string(r.n), fmt(r.sigma), fmt(r.sigma_g), fmt(r.mean), fmt(r.std_error), std::to_string(r.n_delta)});
  return w;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"d", c.d},
          {"target_k", c.target_k},
          {"orders", c.orders},
          {"sigmas", c.sigmas},
          {"sigma_gs", c.sigma_gs},
          {"n_delta", c.n_delta},
          {"ensemble", {{"kind", static_cast<int>(c.ensemble.kind)}, {"size", c.ensemble.size}, {"seed", c.ensemble.seed}}},
          {"restarts", c.restarts},
          {"seed", c.seed}};
}

/// JSON envelope: config echo, seed, hashes, timestamp, rows.
inline nlohmann::json detection_json(const DetectionReport& rep, const ExperimentConfig& cfg,
                                     const std::string& manifest_hash) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"n", r.n}, {"sigma", r.sigma}, {"sigma_G", r.sigma_g}, {"R_mean", r.mean},
                    {"R_stderr", r.std_error}, {"N_delta", r.n_delta}});
  return {{"manifest_hash", manifest_hash}, {"config_hash", rep.config_hash}, {"seed", rep.seed},
          {"target_k", rep.target_k},       {"timestamp", rep.timestamp},     {"config", config_to_json(cfg)},
          {"rows", rows}};
}

}  // namespace cohmoment
