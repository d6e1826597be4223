#pragma once

// Oracles and checkers for the transmission solver, the force, the time
// stepper and completed runs. All checkers are side-effect free.

#include <functional>
#include <string>
#include <vector>

#include "memsflow/minimizing_movements.hpp"

namespace memsflow {

struct CheckReport {
  std::string name;
  bool passed = true;
  double measured = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  std::string context;
};

/// passed iff measured <= bound + tolerance (NaN fails).
CheckReport make_check(std::string name, double measured, double bound, double tolerance,
                       std::string context = {});

bool all_passed(const std::vector<CheckReport>& checks);

/// Exact two-layer capacitor under a flat plate at height w.
struct FlatPlateOracle {
  std::function<double(double x, double z)> psi1;
  std::function<double(double x, double z)> psi2;
  std::function<double(double x)> plate_trace;  // d_z psi2
  std::function<double(double x)> force;        // sigma2 trace^2 / 2
  double energy = 0.0;                          // E_e over D
};

/// Requires w > -H and a z-independent sigma1.
FlatPlateOracle flat_plate_oracle(const ValidatedConfig& config, double w);

struct LedgerReport {
  std::vector<CheckReport> checks;
  std::vector<int> decrease_failures;  // step indices n with a failing n -> n+1 decrease

  bool passed() const { return all_passed(checks); }
};

/// Per-step decrease, cumulative inequality, lower-energy floor,
/// L2 growth envelope and H2 bound over a trace.
LedgerReport check_energy_ledger(const SimulationTrace& trace, const PhysicalParams& params,
                                 double tol_fp);

/// x_T = max{L - (H / 2K)^(2/3), L / 2}.
double localization_radius(double L, double H, double K);

/// Sign, complementarity, feasibility, support in the coincidence set and in
/// [-x_T, x_T] for an accepted step; K is the H2 bound of the run.
std::vector<CheckReport> check_multiplier(const StepResult& step, const ValidatedConfig& config, double K);

struct ConvergenceLevel {
  int n_x = 0;
  int n_z = 0;
  double error = 0.0;
  double order = 0.0;  // against the previous level; 0 on the first
};

struct ConvergenceTable {
  std::string name;
  std::vector<ConvergenceLevel> levels;

  double min_order() const;
  double max_error() const;
};

struct ManufacturedStudy {
  ConvergenceTable l2;    // L2 error of the potential
  ConvergenceTable flux;  // interface flux mismatch
};

/// Manufactured potential with variable sigma1, sources and a deformed plate.
/// Levels double n_x from n0 with n_z = n_x / 4 in each subdomain.
ManufacturedStudy manufactured_study(const PhysicalParams& geometry, int levels, int n0 = 16);

/// Force error of the flat-plate case at each level.
ConvergenceTable flat_plate_study(const ValidatedConfig& config, int levels, int n0 = 16);

/// Steady deflection found by damped Picard iteration on K u = -W g(u).
struct SteadyState {
  BeamState state;
  int iterations = 0;
  double increment = 0.0;  // last sup-norm update
};

/// Throws Error if the iterate leaves the admissible set or does not settle.
SteadyState steady_state(const Scheme& scheme, double tol = 1e-13, int max_iter = 500, double omega = 1.0);

/// sup over interior nodes of |(K u)_i / w_i + g_i(u)|.
double steady_residual(const Scheme& scheme, const BeamState& u);

/// Richardson-type study of the steady deflection in the sup norm on the
/// coarse nodes; the config supplies everything but the mesh.
ConvergenceTable steady_study(const ValidatedConfig& config, int levels, int n0 = 16);

struct RefinementStudy {
  std::vector<double> deltas;
  std::vector<double> distances;  // ||u_delta_k - u_delta_{k+1}||_2 at t
  std::vector<double> ratios;     // distances[k+1] / distances[k]
  std::vector<double> constants;  // distances[k] / deltas[k]
};

RefinementStudy delta_refinement(const Scheme& scheme, const BeamState& u0,
                                 const std::vector<double>& deltas, double t);

struct StabilityReport {
  int samples = 0;
  double max_ratio = 0.0;  // | ||g(u+du)||_2 - ||g(u)||_2 | / ||du||_H2
  double max_change = 0.0;
};

/// Random admissible states and perturbations of H2 size `size`, seeded.
StabilityReport force_stability(const Scheme& scheme, int samples, double size, unsigned seed = 7);

/// Standard-direction gradient check at u = 0 on the configured grid: the
/// error at s = 1e-3 against directional_tolerance(n_x), and monotone
/// improvement over s = 1e-2, 1e-3, 1e-4 down to twice the smallest error.
std::vector<CheckReport> gradient_checks(const Electrostatics& es,
                                         std::vector<DirectionalRow>* rows = nullptr);

/// Worst instance of each named check across several reports (same names,
/// same order); passed only if every instance passed.
std::vector<CheckReport> worst_of(const std::vector<std::vector<CheckReport>>& reports);

/// A run together with its energy ledger and per-step multiplier checks.
struct RunAudit {
  SimulationTrace trace;
  LedgerReport ledger;
  std::vector<CheckReport> multiplier;  // worst over all accepted steps
  double K = 0.0;                       // max H2 norm over the trace
  double x_T = 0.0;

  std::vector<CheckReport> checks() const;
  bool passed() const;
};

/// Runs the scheme and audits every accepted step. `options.on_step` is
/// still called.
RunAudit audit_run(const Scheme& scheme, const BeamState& u0, double delta, double t_end,
                   RunOptions options = {});

}  // namespace memsflow
