#include "memsflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace memsflow {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::string out = "invalid configuration";
  for (const auto& s : v) out += "\n  - " + s;
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Typed reader over a RawConfig that records defaults and violations.
class Reader {
 public:
  explicit Reader(const RawConfig& raw) : raw_(raw) {}

  double real(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) {
      defaulted.push_back(key);
      return fallback;
    }
    double value = 0.0;
    const std::string& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
      violations.push_back(key + ": expected a finite number, got '" + s + "'");
      return fallback;
    }
    return value;
  }

  std::optional<double> optional_real(const std::string& key) {
    if (raw_.find(key) == raw_.end()) {
      used_.insert(key);
      defaulted.push_back(key);
      return std::nullopt;
    }
    return real(key, 0.0);
  }

  int integer(const std::string& key, int fallback) {
    used_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) {
      defaulted.push_back(key);
      return fallback;
    }
    int value = 0;
    const std::string& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      violations.push_back(key + ": expected an integer, got '" + s + "'");
      return fallback;
    }
    return value;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) {
      defaulted.push_back(key);
      return fallback;
    }
    return it->second;
  }

  void reject_unknown() {
    for (const auto& [key, value] : raw_) {
      if (!used_.count(key)) violations.push_back("unknown key '" + key + "'");
    }
  }

  void require(bool ok, const std::string& message) {
    if (!ok) violations.push_back(message);
  }

  std::vector<std::string> violations;
  std::vector<std::string> defaulted;

 private:
  const RawConfig& raw_;
  std::set<std::string> used_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

bool ValidatedConfig::same_parameters(const ValidatedConfig& other) const {
  return physical == other.physical && dielectric == other.dielectric &&
         numerical == other.numerical && initial == other.initial;
}

std::string to_string(Sigma1Profile p) {
  switch (p) {
    case Sigma1Profile::constant: return "constant";
    case Sigma1Profile::affine: return "affine";
    case Sigma1Profile::bump: return "bump";
  }
  return "constant";
}

std::string to_string(InitialProfile p) {
  switch (p) {
    case InitialProfile::zero: return "zero";
    case InitialProfile::bump: return "bump";
    case InitialProfile::table: return "table";
  }
  return "zero";
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "L", "H", "d", "beta", "tau", "a", "V",
      "sigma2", "sigma1_profile", "sigma1", "sigma1_slope", "sigma1_amplitude",
      "sigma_min", "sigma_max", "w_max",
      "n_x", "n_z_layer", "n_eta_gap", "eps_gap", "tol_fp", "tol_as",
      "max_fp", "max_as", "theta", "delta", "t_end", "snapshot_every",
      "u0_profile", "u0_amplitude", "u0_table"};
  return keys;
}

RawConfig parse_config_text(const std::string& text) {
  RawConfig raw;
  std::vector<std::string> violations;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    // Section headers are accepted and ignored; keys stay flat.
    if (line.front() == '[' && line.back() == ']') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      violations.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) {
      violations.push_back("line " + std::to_string(line_no) + ": empty key or value");
      continue;
    }
    if (!raw.emplace(key, value).second) {
      violations.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return raw;
}

RawConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ValidatedConfig validate_config(const RawConfig& raw) {
  Reader r(raw);
  ValidatedConfig cfg;

  auto& p = cfg.physical;
  p.L = r.real("L", p.L);
  p.H = r.real("H", p.H);
  p.d = r.real("d", p.d);
  p.beta = r.real("beta", p.beta);
  p.tau = r.real("tau", p.tau);
  p.a = r.real("a", p.a);
  p.V = r.real("V", p.V);
  r.require(p.L > 0, "L must be positive");
  r.require(p.H > 0, "H must be positive");
  r.require(p.d > 0, "d must be positive");
  r.require(p.beta > 0, "beta must be positive");
  r.require(p.tau >= 0, "tau must be non-negative");
  r.require(p.a >= 0, "a must be non-negative");
  // V = 0 is the purely mechanical limit and is accepted.
  r.require(p.V >= 0, "V must be non-negative");

  auto& e = cfg.dielectric;
  e.sigma2 = r.real("sigma2", e.sigma2);
  const std::string profile = r.text("sigma1_profile", "constant");
  if (profile == "constant") {
    e.profile = Sigma1Profile::constant;
  } else if (profile == "affine") {
    e.profile = Sigma1Profile::affine;
  } else if (profile == "bump") {
    e.profile = Sigma1Profile::bump;
  } else {
    r.violations.push_back("sigma1_profile must be one of constant, affine, bump");
  }
  e.sigma1 = r.real("sigma1", e.sigma1);
  e.sigma1_slope = r.real("sigma1_slope", e.sigma1_slope);
  e.sigma1_amplitude = r.real("sigma1_amplitude", e.sigma1_amplitude);
  e.sigma_min = r.optional_real("sigma_min");
  e.sigma_max = r.optional_real("sigma_max");
  e.w_max = r.real("w_max", p.H > 0 ? p.H : e.w_max);
  r.require(e.sigma2 > 0, "sigma2 must be positive");
  r.require(e.sigma1 > 0, "sigma1 must be positive");
  if (e.profile == Sigma1Profile::affine) {
    r.require(e.sigma1 - std::abs(e.sigma1_slope) > 0,
              "affine sigma1 must stay positive on [-L, L]");
  }
  if (e.profile == Sigma1Profile::bump) {
    r.require(e.sigma1 + std::min(0.0, e.sigma1_amplitude) > 0,
              "bump sigma1 must stay positive on [-L, L]");
  }
  if (e.sigma_min) r.require(*e.sigma_min > 0, "sigma_min must be positive");
  if (e.sigma_min && e.sigma_max) {
    r.require(*e.sigma_min < *e.sigma_max, "sigma_min < sigma_max violated");
  }
  r.require(e.w_max >= -p.H, "w_max must be >= -H");

  auto& n = cfg.numerical;
  n.n_x = r.integer("n_x", n.n_x);
  n.n_z_layer = r.integer("n_z_layer", n.n_z_layer);
  n.n_eta_gap = r.integer("n_eta_gap", n.n_eta_gap);
  n.eps_gap = r.real("eps_gap", 1e-6 * p.H);
  n.tol_fp = r.real("tol_fp", n.tol_fp);
  n.tol_as = r.real("tol_as", n.tol_as);
  n.max_fp = r.integer("max_fp", n.max_fp);
  n.max_as = r.integer("max_as", n.max_as);
  n.theta = r.real("theta", n.theta);
  n.delta = r.optional_real("delta");
  n.t_end = r.real("t_end", n.t_end);
  n.snapshot_every = r.integer("snapshot_every", n.snapshot_every);
  r.require(n.n_x >= 8, "n_x must be >= 8");
  r.require(n.n_z_layer >= 4, "n_z_layer must be >= 4");
  r.require(n.n_eta_gap >= 4, "n_eta_gap must be >= 4");
  r.require(n.eps_gap > 0, "eps_gap must be positive");
  r.require(n.eps_gap < p.H / 10, "eps_gap < H/10 violated");
  r.require(n.tol_fp > 0, "tol_fp must be positive");
  r.require(n.tol_as > 0, "tol_as must be positive");
  r.require(n.max_fp >= 1, "max_fp must be >= 1");
  r.require(n.max_as >= 1, "max_as must be >= 1");
  r.require(n.theta > 0 && n.theta <= 1, "theta must lie in (0, 1]");
  if (n.delta) r.require(*n.delta > 0, "delta must be positive");
  r.require(n.t_end > 0, "t_end must be positive");
  r.require(n.snapshot_every >= 0, "snapshot_every must be >= 0");

  auto& u0 = cfg.initial;
  const std::string u0_profile = r.text("u0_profile", "zero");
  if (u0_profile == "zero") {
    u0.profile = InitialProfile::zero;
  } else if (u0_profile == "bump") {
    u0.profile = InitialProfile::bump;
  } else if (u0_profile == "table") {
    u0.profile = InitialProfile::table;
  } else {
    r.violations.push_back("u0_profile must be one of zero, bump, table");
  }
  u0.amplitude = r.real("u0_amplitude", u0.amplitude);
  u0.table_path = r.text("u0_table", "");
  if (u0.profile == InitialProfile::bump) {
    // The bump attains its minimum amplitude at x = 0.
    r.require(u0.amplitude >= -p.H, "u0 bump must satisfy u0 >= -H");
  }
  if (u0.profile == InitialProfile::table) {
    r.require(!u0.table_path.empty(), "u0_profile = table requires u0_table");
  }

  r.reject_unknown();
  if (!r.violations.empty()) throw ConfigError(std::move(r.violations));
  cfg.defaulted = std::move(r.defaulted);
  return cfg;
}

ValidatedConfig validate_config(const ValidatedConfig& config) {
  ValidatedConfig checked = validate_config(to_raw(config));
  checked.defaulted = config.defaulted;
  return checked;
}

RawConfig to_raw(const ValidatedConfig& c) {
  RawConfig raw;
  const auto& p = c.physical;
  raw["L"] = format_double(p.L);
  raw["H"] = format_double(p.H);
  raw["d"] = format_double(p.d);
  raw["beta"] = format_double(p.beta);
  raw["tau"] = format_double(p.tau);
  raw["a"] = format_double(p.a);
  raw["V"] = format_double(p.V);
  const auto& e = c.dielectric;
  raw["sigma2"] = format_double(e.sigma2);
  raw["sigma1_profile"] = to_string(e.profile);
  raw["sigma1"] = format_double(e.sigma1);
  raw["sigma1_slope"] = format_double(e.sigma1_slope);
  raw["sigma1_amplitude"] = format_double(e.sigma1_amplitude);
  if (e.sigma_min) raw["sigma_min"] = format_double(*e.sigma_min);
  if (e.sigma_max) raw["sigma_max"] = format_double(*e.sigma_max);
  raw["w_max"] = format_double(e.w_max);
  const auto& n = c.numerical;
  raw["n_x"] = std::to_string(n.n_x);
  raw["n_z_layer"] = std::to_string(n.n_z_layer);
  raw["n_eta_gap"] = std::to_string(n.n_eta_gap);
  raw["eps_gap"] = format_double(n.eps_gap);
  raw["tol_fp"] = format_double(n.tol_fp);
  raw["tol_as"] = format_double(n.tol_as);
  raw["max_fp"] = std::to_string(n.max_fp);
  raw["max_as"] = std::to_string(n.max_as);
  raw["theta"] = format_double(n.theta);
  if (n.delta) raw["delta"] = format_double(*n.delta);
  raw["t_end"] = format_double(n.t_end);
  raw["snapshot_every"] = std::to_string(n.snapshot_every);
  raw["u0_profile"] = to_string(c.initial.profile);
  raw["u0_amplitude"] = format_double(c.initial.amplitude);
  if (!c.initial.table_path.empty()) raw["u0_table"] = c.initial.table_path;
  return raw;
}

std::string to_config_text(const ValidatedConfig& config) {
  const RawConfig raw = to_raw(config);
  std::ostringstream os;
  for (const auto& key : config_keys()) {
    if (auto it = raw.find(key); it != raw.end()) {
      os << key << " = " << it->second << "\n";
    }
  }
  return os.str();
}

}  // namespace memsflow
