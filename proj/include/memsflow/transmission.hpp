#pragma once

// Elliptic transmission problem for the potential on the layer and the gap
// under the deflected plate.
//
// The layer [-L, L] x [-H-d, -H] carries a fixed tensor grid. The gap over
// each beam column x_i is mapped to the reference interval eta in [0, 1] by
// z = -H + eta * g_i with g_i = u_i + H, so the gap grid shares the beam's
// x-nodes and is a mesh of bilinear quadrilaterals in physical coordinates.
// Both grids share the interface nodes at z = -H on free columns, which
// carries continuity; flux matching is the natural interface condition of
// the assembled energy. Columns with g_i < eps_gap are touching: their gap
// strip is excised and the interface node takes the plate value.
//
// The discrete operator is the bilinear-element stiffness with 2x2 Gauss
// quadrature, which is exact for potentials that are linear per subdomain and
// makes the electrostatic energy identical to the assembled quadratic form.

#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <vector>

#include "memsflow/beam.hpp"
#include "memsflow/dielectric.hpp"

namespace memsflow {

/// Linear solve failure (singular or inaccurate system).
class SolverError : public Error {
 public:
  using Error::Error;
};

enum class Column : std::uint8_t { free, touching };

struct CompositeMesh {
  BeamGrid grid;
  double H = 1.0;
  double d = 1.0;
  int nz_layer = 4;
  int nz_gap = 4;
  double eps_gap = 1e-6;
  std::vector<double> deflection;  // u_i
  std::vector<double> height;      // g_i = u_i + H
  std::vector<Column> columns;

  double layer_z(int j) const { return -H - d + j * d / nz_layer; }
  double gap_eta(int k) const { return static_cast<double>(k) / nz_gap; }
  double gap_z(int i, int k) const { return -H + gap_eta(k) * height[i]; }
  bool touching(int i) const { return columns[i] == Column::touching; }
  int touching_count() const;
};

/// Requires an admissible state (u_i >= -H). The state need not be clamped.
CompositeMesh build_mesh(const BeamState& state, const PhysicalParams& params,
                         const NumericalParams& numerics);

/// Generic data of a transmission solve: -div(sigma grad psi) = f with
/// Dirichlet values on the outer boundary.
struct TransmissionProblem {
  std::function<double(double x, double z)> sigma1;
  double sigma2 = 1.0;
  /// Layer sides and bottom, at column i.
  std::function<double(int i, double x, double z)> layer_boundary;
  /// Gap sides and the degenerate strips of touching columns, at column i.
  std::function<double(int i, double x, double z)> gap_boundary;
  /// Plate graph; also the interface value under a touching column.
  std::function<double(int i, double x)> plate;
  /// Optional sources (manufactured solutions).
  std::function<double(double x, double z)> source1;
  std::function<double(double x, double z)> source2;
};

/// The potential problem with Dirichlet data h_u built from the model.
TransmissionProblem potential_problem(const PermittivityModel& perm,
                                      const BoundaryDataModel& bdata,
                                      const CompositeMesh& mesh);

struct QuadratureSample {
  double weight = 0.0;  // sigma * |det J| * Gauss weight
  double grad2 = 0.0;   // |grad psi|^2
  bool layer = true;
};

struct PotentialSolution {
  CompositeMesh mesh;
  double sigma2 = 1.0;
  std::vector<double> psi1;              // layer nodes, index i * (nz_layer + 1) + j
  std::vector<double> phi2;              // gap nodes, index i * (nz_gap + 1) + k
  std::vector<double> sigma1_interface;  // sigma1(x_i, -H)
  std::vector<QuadratureSample> energy_density;
  /// Full stiffness over all nodes (Dirichlet included) and the matching
  /// nodal vector; the energy identity is checked against these.
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd nodal;
  Eigen::VectorXd load;  // source load over all nodes
  int unknowns = 0;
  double residual = 0.0;
  double rhs_norm = 0.0;

  double layer(int i, int j) const { return psi1[i * (mesh.nz_layer + 1) + j]; }
  double gap(int i, int k) const { return phi2[i * (mesh.nz_gap + 1) + k]; }
  double min_value() const;
  double max_value() const;
};

/// Solves the transmission problem; residual <= tol_as (1 + ||rhs||).
/// Throws SolverError on factorization failure or residual excess.
PotentialSolution solve(const CompositeMesh& mesh, const TransmissionProblem& problem,
                        double tol_as);

/// Convenience: the potential for the model's boundary data.
PotentialSolution solve(const CompositeMesh& mesh, const PermittivityModel& perm,
                        const BoundaryDataModel& bdata, double tol_as);

struct Traces {
  std::vector<double> plate;      // d_z psi2 at (x_i, u_i); 0 on touching columns
  std::vector<double> layer;      // d_z psi1 at (x_i, -H), layer side
  std::vector<double> gap_floor;  // d_z psi2 at (x_i, -H), gap side; 0 on touching
};

/// One-sided three-point differences, rescaled by 1/g_i in the gap.
Traces traces(const PotentialSolution& sol);

/// Exact derivative of the discrete electrostatic energy with respect to the
/// deflection at each interior free column (complex-step differentiation of
/// the gap element stiffness; the potential is held fixed by stationarity).
/// Zero at the clamped ends and on touching columns.
std::vector<double> energy_gradient(const PotentialSolution& sol);

/// max |sigma1 d_z psi1 - sigma2 d_z psi2| over free interior interface nodes.
double flux_mismatch(const PotentialSolution& sol);

/// L2 distance to an exact potential by Gauss quadrature of the bilinear
/// interpolant on every cell.
double l2_error(const PotentialSolution& sol, const std::function<double(double, double)>& exact1,
                const std::function<double(double, double)>& exact2);

}  // namespace memsflow
