#pragma once

// Clamped beam deflection on a uniform grid of D = (-L, L).
//
// Derivatives are centered differences. The clamped ends use ghost values
// reflected across the boundary, u_{-1} = u_1 and u_{n+1} = u_{n-1}, which
// makes the end slope vanish and gives D2 u_0 = 2 u_1 / h^2. Integrals use the
// trapezoid rule on nodal values everywhere, so energies, norms and the
// multiplier pairing share one quadrature.

#include <Eigen/SparseCore>

#include <span>
#include <vector>

#include "memsflow/config.hpp"

namespace memsflow {

struct BeamGrid {
  double L = 1.0;
  int n = 8;  // number of intervals

  double h() const { return 2.0 * L / n; }
  double x(int i) const { return -L + i * h(); }
  int nodes() const { return n + 1; }
  /// Trapezoid weight of node i.
  double weight(int i) const { return (i == 0 || i == n) ? 0.5 * h() : h(); }
};

struct BeamState {
  BeamGrid grid;
  std::vector<double> u;

  BeamState() = default;
  BeamState(BeamGrid g, std::vector<double> values);
  /// Zero deflection.
  explicit BeamState(BeamGrid g);

  /// u_0 = u_n = 0 (the slope condition is carried by the ghost convention).
  bool is_clamped() const;
  /// u_i >= -H at every node, with no tolerance.
  bool is_admissible(double H) const;
  double min() const;
  double max_abs() const;
};

/// Samples f at the grid nodes.
template <class F>
BeamState sample(const BeamGrid& grid, F&& f) {
  std::vector<double> u(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) u[i] = f(grid.x(i));
  return BeamState(grid, std::move(u));
}

/// Clamped bump c (1 - (x/L)^2)^2.
BeamState clamped_bump(const BeamGrid& grid, double amplitude);

std::vector<double> second_difference(const BeamState& state);
std::vector<double> first_difference(const BeamState& state);

double trapezoid(const BeamGrid& grid, std::span<const double> values);
/// Trapezoid rule of the squared nodal values.
double trapezoid_squared(const BeamGrid& grid, std::span<const double> values);

struct H2Norms {
  double l2 = 0.0;   // ||u||_2
  double dx = 0.0;   // ||d_x u||_2
  double dxx = 0.0;  // ||d_x^2 u||_2

  double h2() const;  // full H^2 norm
};

H2Norms h2_seminorms(const BeamState& state);

/// (beta/2)||u''||^2 + (tau/2 + (a/4)||u'||^2) ||u'||^2.
double mechanical_energy(const BeamState& state, const PhysicalParams& params);

/// Difference operators restricted to the interior unknowns u_1..u_{n-1}.
/// Rows index all nodes 0..n; the clamped values are eliminated.
struct BeamOperators {
  Eigen::SparseMatrix<double> d2;  // (n+1) x (n-1)
  Eigen::SparseMatrix<double> dx;  // (n+1) x (n-1)
  Eigen::VectorXd weights;         // trapezoid weights, size n+1

  /// d2^T W d2, the Hessian of (1/2)||u''||^2 in interior unknowns.
  Eigen::SparseMatrix<double> bending() const;
  /// dx^T W dx, the Hessian of (1/2)||u'||^2 in interior unknowns.
  Eigen::SparseMatrix<double> stretching() const;
};

BeamOperators beam_operators(const BeamGrid& grid);

Eigen::VectorXd interior(const BeamState& state);
BeamState from_interior(const BeamGrid& grid, const Eigen::VectorXd& values);

}  // namespace memsflow
