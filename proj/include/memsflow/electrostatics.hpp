#pragma once

// Electrostatic energy and force of a deflected beam, built on the
// transmission solver.

#include <vector>

#include "memsflow/transmission.hpp"

namespace memsflow {

struct ForceProfile {
  std::vector<double> g;           // force per unit length at each node, >= 0
  std::vector<Column> branch;      // free or coincidence formula
};

/// -(1/2) sum of sigma |grad psi|^2 over the quadrature samples.
double electrostatic_energy(const PotentialSolution& sol);

/// -(1/2) psi^T K psi with the assembled stiffness.
double bilinear_energy(const PotentialSolution& sol);

/// Free nodes: (sigma2/2)(1 + (d_x u)^2)(d_z psi2 at the plate)^2.
/// Touching nodes: (sigma1(x,-H)^2 / (2 sigma2)) (d_z psi1 at z = -H)^2.
ForceProfile force(const PotentialSolution& sol, const BeamState& state);

/// Which discrete force the time stepper uses.
enum class ForceModel {
  trace,     // the pointwise trace formula above
  gradient,  // exact gradient of the discrete energy on free columns; may undershoot 0 by O(h^2) where g is tiny
};

/// Everything needed to evaluate E_e and g for a deflection.
struct Electrostatics {
  PhysicalParams physical;
  NumericalParams numerical;
  PermittivityModel perm;
  BoundaryDataModel bdata;

  struct Evaluation {
    PotentialSolution solution;
    double energy = 0.0;
    ForceProfile force;
  };

  /// One transmission solve. Requires an admissible state.
  Evaluation evaluate(const BeamState& state, ForceModel model = ForceModel::trace) const;
  double energy(const BeamState& state) const;
};

/// Builds the permittivity and the closed-form boundary data from a config.
Electrostatics make_electrostatics(const ValidatedConfig& config);

struct DirectionalRow {
  double s = 0.0;
  double quotient = 0.0;  // (E_e(u + s(w-u)) - E_e(u)) / s
  double pairing = 0.0;   // trapezoid of g(u)(w-u)
  double rel_error = 0.0;
};

/// Throws Error if u + s(w - u) is inadmissible for some s.
std::vector<DirectionalRow> directional_derivative_check(const Electrostatics& es, const BeamState& u,
                                                         const BeamState& w,
                                                         const std::vector<double>& s_list);

/// Standard test direction: w = u - (H/40) b / max(b) with b the clamped bump.
BeamState standard_direction(const BeamState& u, double H);

/// Gradient check tolerance at s = 1e-3 for a grid with n_x intervals.
double directional_tolerance(int n_x);

}  // namespace memsflow
