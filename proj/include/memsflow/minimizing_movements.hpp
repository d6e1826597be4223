#pragma once

// Time-implicit minimizing-movements scheme: every step minimizes
// (1/2 delta)||v - u_n||^2 + E(v) over v >= -H by a frozen-force fixed point
// wrapped around a primal-dual active-set solve of the obstacle problem.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "memsflow/beam.hpp"
#include "memsflow/electrostatics.hpp"

namespace memsflow {

/// Fixed point or backtracking failure inside a time step.
class StepError : public Error {
 public:
  using Error::Error;
};

struct SchemeConstants {
  double A = 0.0;  // 3 L m1 (d+1) sigma_max
  double B = 0.0;  // (3/2) m2 (d+1) sigma_max
  double K = 0.0;  // (d+1) sigma_max m3
  double c1 = 0.0;
  double delta0 = 1.0;
  MConstants m;
};

/// c1 = max{A + K^2/beta, B + K^2/beta}, delta0 = min{1, 1/(16 c1)}.
/// Throws Error for non-positive L, d, beta or sigma_max, or negative m.
SchemeConstants lower_bound_constant(const PhysicalParams& params, double sigma_max, const MConstants& m);

/// min{1, 1/(16 c1)}; 1 when c1 = 0.
double delta0_for(double c1);

struct EnergyBreakdown {
  double mechanical = 0.0;
  double electrostatic = 0.0;
  double total = 0.0;
};

struct StepResult {
  BeamState state;
  std::vector<double> multiplier;  // zeta_i, <= 0 on contact
  std::vector<double> velocity;    // (u_{n+1} - u_n) / delta
  EnergyBreakdown energy;          // at u_{n+1}
  double dissipation = 0.0;        // (1/2 delta) ||u_{n+1} - u_n||^2
  int fp_iters = 0;
  int as_iters = 0;
  double fp_residual = 0.0;
  double theta = 1.0;              // damping at exit
  double backtrack = 1.0;          // accepted fraction of the step
  bool decrease_ok = true;
  double decrease_excess = 0.0;    // F(u_{n+1}) - E(u_n)
  double complementarity = 0.0;    // max |zeta_i (u_i + H)|
  double multiplier_mass = 0.0;    // sum of -zeta_i w_i
  std::vector<char> active;        // nodes held on the obstacle
  ForceProfile force;              // g at u_{n+1}
  Electrostatics::Evaluation evaluation;  // potential at u_{n+1}
};

/// Model data shared by every step of a run.
struct Scheme {
  ValidatedConfig config;
  Electrostatics electrostatics;
  SchemeConstants constants;
  BeamOperators ops;
  ForceModel force_model = ForceModel::gradient;

  EnergyBreakdown energy(const BeamState& state) const;
  EnergyBreakdown energy(const BeamState& state, const Electrostatics::Evaluation& ev) const;

  /// One step from an admissible u_n. `at_un` may carry the evaluation at u_n.
  StepResult step(const BeamState& un, double delta,
                  const std::optional<Electrostatics::Evaluation>& at_un = std::nullopt) const;
};

Scheme make_scheme(const ValidatedConfig& config, ForceModel force_model = ForceModel::gradient);

/// u_0 from the configured family. Table files hold "x u" pairs and are
/// linearly interpolated onto the grid. Throws ConfigError if the result is
/// not clamped or not admissible.
BeamState initial_state(const ValidatedConfig& config);

struct StepRecord {
  int index = 0;  // n: state u_n
  double t = 0.0;
  EnergyBreakdown energy;
  double dissipation = 0.0;      // of the step that produced u_n
  double dissipation_cum = 0.0;
  double min_gap = 0.0;          // min(u + H)
  int coincidence_count = 0;
  double multiplier_mass = 0.0;
  int fp_iters = 0;
  int as_iters = 0;
  double backtrack = 1.0;
  bool decrease_ok = true;
  double decrease_excess = 0.0;
  double complementarity = 0.0;
  double l2_sq = 0.0;   // ||u_n||^2
  double dxx_sq = 0.0;  // ||u_n''||^2
  double h2_sq = 0.0;   // full H^2 norm squared
};

struct RunOptions {
  int snapshot_every = 0;  // keep u_n every k steps (0: first and last only)
  bool keep_all_states = false;
  std::function<void(int n, const StepResult&)> on_step;
};

struct SimulationTrace {
  double delta = 0.0;
  SchemeConstants constants;
  bool delta_exceeds_delta0 = false;
  std::vector<double> times;
  std::vector<StepRecord> records;          // records[n] describes u_n
  std::vector<int> state_index;             // which u_n are kept
  std::vector<BeamState> states;
  std::vector<std::vector<double>> multipliers;  // matching kept states
  bool completed = false;
  std::string error;
  int touchdown_step = -1;                  // first n with a touching column

  const BeamState& final_state() const { return states.back(); }
};

/// Runs ceil(t_end / delta) steps. A failing step stops the run; the partial
/// trace is returned with `completed = false` and the error message.
SimulationTrace run(const Scheme& scheme, const BeamState& u0, double delta, double t_end,
                    const RunOptions& options = {});

}  // namespace memsflow
