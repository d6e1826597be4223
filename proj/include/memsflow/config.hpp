#pragma once

// Physical and numerical parameters of the beam/dielectric model and the
// time-implicit scheme, plus the flat key-value configuration file reader.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace memsflow {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. Carries every violated constraint.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  explicit ConfigError(const std::string& violation)
      : ConfigError(std::vector<std::string>{violation}) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Geometry, mechanics and actuation of the device (dimensionless units).
struct PhysicalParams {
  double L = 1.0;     // half-width of D = (-L, L)
  double H = 1.0;     // gap depth
  double d = 1.0;     // dielectric layer thickness
  double beta = 1.0;  // bending stiffness
  double tau = 0.0;   // axial tension
  double a = 0.0;     // self-stretching coefficient
  double V = 1.0;     // plate potential

  bool operator==(const PhysicalParams&) const = default;
};

/// Horizontal profile families for the layer permittivity sigma1(x).
enum class Sigma1Profile { constant, affine, bump };

struct DielectricParams {
  double sigma2 = 1.0;
  Sigma1Profile profile = Sigma1Profile::constant;
  double sigma1 = 1.0;            // base value
  double sigma1_slope = 0.0;      // affine: sigma1 + slope * x / L
  double sigma1_amplitude = 0.0;  // bump: sigma1 + amp * (1 + cos(pi x / L)) / 2
  std::optional<double> sigma_min;
  std::optional<double> sigma_max;
  double w_max = 1.0;  // certified upper deflection for the m-constants

  bool operator==(const DielectricParams&) const = default;
};

struct NumericalParams {
  int n_x = 200;
  int n_z_layer = 32;
  int n_eta_gap = 32;
  double eps_gap = 1e-6;  // absolute; the default scales with H
  double tol_fp = 1e-10;
  double tol_as = 1e-12;
  int max_fp = 200;
  int max_as = 100;
  double theta = 1.0;            // initial fixed-point damping
  std::optional<double> delta;   // empty: use delta0 from the scheme constants
  double t_end = 1.0;
  int snapshot_every = 0;        // 0 disables snapshots

  bool operator==(const NumericalParams&) const = default;
};

enum class InitialProfile { zero, bump, table };

struct InitialCondition {
  InitialProfile profile = InitialProfile::zero;
  double amplitude = 0.0;   // bump: amplitude * (1 - (x/L)^2)^2
  std::string table_path;   // table: one "x u" pair per line

  bool operator==(const InitialCondition&) const = default;
};

/// Raw flat key -> value text map as read from a configuration file.
using RawConfig = std::map<std::string, std::string>;

struct ValidatedConfig {
  PhysicalParams physical;
  DielectricParams dielectric;
  NumericalParams numerical;
  InitialCondition initial;
  std::vector<std::string> defaulted;  // keys that took their default value

  /// Parameter content equality; the defaulted echo is ignored.
  bool same_parameters(const ValidatedConfig& other) const;
};

/// Parses "key = value" lines; '#' starts a comment. Throws ConfigError on
/// malformed lines or duplicate keys.
RawConfig parse_config_text(const std::string& text);
RawConfig read_config_file(const std::string& path);

/// Checks every constraint and fills defaults. Unknown keys are an error.
/// Throws ConfigError listing all violations.
ValidatedConfig validate_config(const RawConfig& raw);

/// Re-checks an already validated configuration and returns it unchanged.
ValidatedConfig validate_config(const ValidatedConfig& config);

/// Serializes every parameter explicitly (17 significant digits).
RawConfig to_raw(const ValidatedConfig& config);
std::string to_config_text(const ValidatedConfig& config);

/// Known configuration keys, in canonical order.
const std::vector<std::string>& config_keys();

std::string to_string(Sigma1Profile p);
std::string to_string(InitialProfile p);

}  // namespace memsflow
