#include "memsflow/transmission.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace memsflow {

namespace {

constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

// Node numbering: layer nodes first, then gap nodes k >= 1. Gap node k = 0
// is the layer node on the interface.
struct Numbering {
  int n = 0;
  int nz1 = 0;
  int nz2 = 0;

  int layer_count() const { return (n + 1) * (nz1 + 1); }
  int total() const { return layer_count() + (n + 1) * nz2; }
  int layer(int i, int j) const { return i * (nz1 + 1) + j; }
  int gap(int i, int k) const { return k == 0 ? layer(i, nz1) : layer_count() + i * nz2 + (k - 1); }
};

// Shape functions and derivatives of the bilinear reference element. The
// scalar is templated so node heights can carry a complex step.
template <class T>
struct ShapeEvalT {
  std::array<double, 4> N;
  std::array<T, 4> dx;
  std::array<T, 4> dz;
  T det = 0.0;
  double x = 0.0;
  T z = 0.0;
};

template <class T>
ShapeEvalT<T> eval_shape_t(const std::array<double, 4>& qx, const std::array<T, 4>& qz, double xi,
                           double eta) {
  static constexpr std::array<double, 4> sx{-1.0, 1.0, 1.0, -1.0};
  static constexpr std::array<double, 4> sz{-1.0, -1.0, 1.0, 1.0};
  ShapeEvalT<T> e;
  std::array<double, 4> dxi;
  std::array<double, 4> deta;
  for (int a = 0; a < 4; ++a) {
    e.N[a] = 0.25 * (1.0 + sx[a] * xi) * (1.0 + sz[a] * eta);
    dxi[a] = 0.25 * sx[a] * (1.0 + sz[a] * eta);
    deta[a] = 0.25 * sz[a] * (1.0 + sx[a] * xi);
  }
  double j11 = 0.0, j12 = 0.0;  // d x / d(xi, eta)
  T j21 = 0.0, j22 = 0.0;       // d z / d(xi, eta)
  for (int a = 0; a < 4; ++a) {
    j11 += dxi[a] * qx[a];
    j12 += deta[a] * qx[a];
    j21 += dxi[a] * qz[a];
    j22 += deta[a] * qz[a];
    e.x += e.N[a] * qx[a];
    e.z += e.N[a] * qz[a];
  }
  e.det = j11 * j22 - j12 * j21;
  const T inv = T(1.0) / e.det;
  for (int a = 0; a < 4; ++a) {
    e.dx[a] = inv * (j22 * dxi[a] - j21 * deta[a]);
    e.dz[a] = inv * (-j12 * dxi[a] + j11 * deta[a]);
  }
  return e;
}

struct Quad {
  std::array<int, 4> node;  // counter-clockwise from lower left
  std::array<double, 4> x;
  std::array<double, 4> z;
};

using ShapeEval = ShapeEvalT<double>;

ShapeEval eval_shape(const Quad& q, double xi, double eta) { return eval_shape_t(q.x, q.z, xi, eta); }

struct Cell {
  Quad quad;
  bool layer = true;
  int i = 0;  // left column
  int k = 0;  // vertical index within the subdomain
};

std::vector<Cell> cells(const CompositeMesh& mesh, const Numbering& num) {
  std::vector<Cell> out;
  const int n = mesh.grid.n;
  out.reserve(static_cast<std::size_t>(n) * (mesh.nz_layer + mesh.nz_gap));
  for (int i = 0; i < n; ++i) {
    const double xa = mesh.grid.x(i);
    const double xb = mesh.grid.x(i + 1);
    for (int j = 0; j < mesh.nz_layer; ++j) {
      Cell c;
      c.layer = true;
      c.i = i;
      c.k = j;
      c.quad.node = {num.layer(i, j), num.layer(i + 1, j), num.layer(i + 1, j + 1), num.layer(i, j + 1)};
      c.quad.x = {xa, xb, xb, xa};
      c.quad.z = {mesh.layer_z(j), mesh.layer_z(j), mesh.layer_z(j + 1), mesh.layer_z(j + 1)};
      out.push_back(c);
    }
    // A strip between two touching columns has no gap left.
    if (mesh.touching(i) && mesh.touching(i + 1)) continue;
    for (int k = 0; k < mesh.nz_gap; ++k) {
      Cell c;
      c.layer = false;
      c.i = i;
      c.k = k;
      c.quad.node = {num.gap(i, k), num.gap(i + 1, k), num.gap(i + 1, k + 1), num.gap(i, k + 1)};
      c.quad.x = {xa, xb, xb, xa};
      c.quad.z = {mesh.gap_z(i, k), mesh.gap_z(i + 1, k), mesh.gap_z(i + 1, k + 1), mesh.gap_z(i, k + 1)};
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

int CompositeMesh::touching_count() const {
  return static_cast<int>(std::count(columns.begin(), columns.end(), Column::touching));
}

CompositeMesh build_mesh(const BeamState& state, const PhysicalParams& params,
                         const NumericalParams& numerics) {
  if (!state.is_admissible(params.H)) throw Error("build_mesh: state is not admissible (u < -H)");
  CompositeMesh mesh;
  mesh.grid = state.grid;
  mesh.H = params.H;
  mesh.d = params.d;
  mesh.nz_layer = numerics.n_z_layer;
  mesh.nz_gap = numerics.n_eta_gap;
  mesh.eps_gap = numerics.eps_gap;
  mesh.deflection = state.u;
  mesh.height.resize(state.u.size());
  mesh.columns.resize(state.u.size());
  for (std::size_t i = 0; i < state.u.size(); ++i) {
    mesh.height[i] = state.u[i] + params.H;
    mesh.columns[i] = mesh.height[i] < mesh.eps_gap ? Column::touching : Column::free;
  }
  return mesh;
}

TransmissionProblem potential_problem(const PermittivityModel& perm,
                                      const BoundaryDataModel& bdata,
                                      const CompositeMesh& mesh) {
  TransmissionProblem p;
  p.sigma1 = perm.sigma1;
  p.sigma2 = perm.sigma2;
  const std::vector<double> u = mesh.deflection;
  auto h1 = bdata.h1;
  auto h2 = bdata.h2;
  const double V = bdata.V;
  p.layer_boundary = [h1, u](int i, double x, double z) { return h1(x, z, u[i]).value; };
  p.gap_boundary = [h2, u](int i, double x, double z) { return h2(x, z, u[i]).value; };
  p.plate = [V](int, double) { return V; };
  return p;
}

double PotentialSolution::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : psi1) m = std::min(m, v);
  for (double v : phi2) m = std::min(m, v);
  return m;
}

double PotentialSolution::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : psi1) m = std::max(m, v);
  for (double v : phi2) m = std::max(m, v);
  return m;
}

PotentialSolution solve(const CompositeMesh& mesh, const TransmissionProblem& problem,
                        double tol_as) {
  const int n = mesh.grid.n;
  const Numbering num{n, mesh.nz_layer, mesh.nz_gap};
  const int total = num.total();

  // Dirichlet values; NaN marks an unknown.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fixed(total, nan);
  for (int i = 0; i <= n; ++i) {
    const double x = mesh.grid.x(i);
    const bool lateral = (i == 0 || i == n);
    for (int j = 0; j <= mesh.nz_layer; ++j) {
      if (lateral || j == 0) fixed[num.layer(i, j)] = problem.layer_boundary(i, x, mesh.layer_z(j));
    }
    if (!lateral && mesh.touching(i)) fixed[num.layer(i, mesh.nz_layer)] = problem.plate(i, x);
    for (int k = 1; k < mesh.nz_gap; ++k) {
      if (lateral || mesh.touching(i)) fixed[num.gap(i, k)] = problem.gap_boundary(i, x, mesh.gap_z(i, k));
    }
    fixed[num.gap(i, mesh.nz_gap)] = problem.plate(i, x);
  }

  std::vector<int> unknown_index(total, -1);
  int unknowns = 0;
  for (int a = 0; a < total; ++a) {
    if (std::isnan(fixed[a])) unknown_index[a] = unknowns++;
  }

  const std::vector<Cell> mesh_cells = cells(mesh, num);
  const std::array<double, 2> gp{-kGauss, kGauss};
  std::vector<Eigen::Triplet<double>> full;
  full.reserve(mesh_cells.size() * 16);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(total);
  for (const Cell& c : mesh_cells) {
    std::array<std::array<double, 4>, 4> ke{};
    std::array<double, 4> fe{};
    const auto& source = c.layer ? problem.source1 : problem.source2;
    for (double xi : gp) {
      for (double eta : gp) {
        const ShapeEval e = eval_shape(c.quad, xi, eta);
        if (!(e.det > 0.0)) {
          std::ostringstream os;
          os << "transmission: degenerate cell at x = " << e.x << ", z = " << e.z
             << " (det J = " << e.det << ")";
          throw SolverError(os.str());
        }
        const double s = c.layer ? problem.sigma1(e.x, e.z) : problem.sigma2;
        const double w = s * e.det;
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) ke[a][b] += w * (e.dx[a] * e.dx[b] + e.dz[a] * e.dz[b]);
        }
        if (source) {
          const double f = source(e.x, e.z) * e.det;
          for (int a = 0; a < 4; ++a) fe[a] += f * e.N[a];
        }
      }
    }
    for (int a = 0; a < 4; ++a) {
      load[c.quad.node[a]] += fe[a];
      for (int b = 0; b < 4; ++b) full.emplace_back(c.quad.node[a], c.quad.node[b], ke[a][b]);
    }
  }
  Eigen::SparseMatrix<double> K(total, total);
  K.setFromTriplets(full.begin(), full.end());

  // Reduced system over the unknowns.
  std::vector<Eigen::Triplet<double>> reduced;
  reduced.reserve(full.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
  for (int a = 0; a < total; ++a) {
    if (unknown_index[a] >= 0) rhs[unknown_index[a]] += load[a];
  }
  for (int col = 0; col < K.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it) {
      const int r = unknown_index[it.row()];
      if (r < 0) continue;
      const int cidx = unknown_index[it.col()];
      if (cidx >= 0) {
        reduced.emplace_back(r, cidx, it.value());
      } else {
        rhs[r] -= it.value() * fixed[it.col()];
      }
    }
  }
  Eigen::SparseMatrix<double> A(unknowns, unknowns);
  A.setFromTriplets(reduced.begin(), reduced.end());

  Eigen::VectorXd sol = Eigen::VectorXd::Zero(unknowns);
  double residual = 0.0;
  const double rhs_norm = rhs.norm();
  if (unknowns > 0) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(A);
    if (ldlt.info() != Eigen::Success) {
      std::ostringstream os;
      os << "transmission: factorization failed (" << unknowns << " unknowns, "
         << mesh.touching_count() << " touching columns, min gap "
         << *std::min_element(mesh.height.begin(), mesh.height.end()) << ")";
      throw SolverError(os.str());
    }
    sol = ldlt.solve(rhs);
    residual = (A * sol - rhs).norm();
    for (int pass = 0; pass < 3 && residual > tol_as * (1.0 + rhs_norm); ++pass) {
      sol += ldlt.solve(rhs - A * sol);
      residual = (A * sol - rhs).norm();
    }
    if (!(residual <= tol_as * (1.0 + rhs_norm))) {
      std::ostringstream os;
      os << "transmission: residual " << residual << " exceeds tol_as (1 + |rhs|) = "
         << tol_as * (1.0 + rhs_norm) << " (" << unknowns << " unknowns, "
         << mesh.touching_count() << " touching columns)";
      throw SolverError(os.str());
    }
  }

  PotentialSolution out;
  out.mesh = mesh;
  out.sigma2 = problem.sigma2;
  out.unknowns = unknowns;
  out.residual = residual;
  out.rhs_norm = rhs_norm;
  out.nodal.resize(total);
  for (int a = 0; a < total; ++a) {
    out.nodal[a] = unknown_index[a] >= 0 ? sol[unknown_index[a]] : fixed[a];
  }
  out.psi1.resize(num.layer_count());
  for (int a = 0; a < num.layer_count(); ++a) out.psi1[a] = out.nodal[a];
  out.phi2.resize(static_cast<std::size_t>(n + 1) * (mesh.nz_gap + 1));
  for (int i = 0; i <= n; ++i) {
    for (int k = 0; k <= mesh.nz_gap; ++k) out.phi2[i * (mesh.nz_gap + 1) + k] = out.nodal[num.gap(i, k)];
  }
  out.sigma1_interface.resize(n + 1);
  for (int i = 0; i <= n; ++i) out.sigma1_interface[i] = problem.sigma1(mesh.grid.x(i), -mesh.H);

  out.energy_density.reserve(mesh_cells.size() * 4);
  for (const Cell& c : mesh_cells) {
    for (double xi : gp) {
      for (double eta : gp) {
        const ShapeEval e = eval_shape(c.quad, xi, eta);
        double gx = 0.0;
        double gz = 0.0;
        for (int a = 0; a < 4; ++a) {
          gx += e.dx[a] * out.nodal[c.quad.node[a]];
          gz += e.dz[a] * out.nodal[c.quad.node[a]];
        }
        const double s = c.layer ? problem.sigma1(e.x, e.z) : problem.sigma2;
        out.energy_density.push_back({s * e.det, gx * gx + gz * gz, c.layer});
      }
    }
  }
  out.stiffness = std::move(K);
  out.load = std::move(load);
  return out;
}

PotentialSolution solve(const CompositeMesh& mesh, const PermittivityModel& perm,
                        const BoundaryDataModel& bdata, double tol_as) {
  return solve(mesh, potential_problem(perm, bdata, mesh), tol_as);
}

Traces traces(const PotentialSolution& sol) {
  const CompositeMesh& m = sol.mesh;
  const int n = m.grid.n;
  const int N = m.nz_gap;
  const int J = m.nz_layer;
  const double deta = 1.0 / N;
  const double dz = m.d / J;
  Traces t;
  t.plate.assign(n + 1, 0.0);
  t.layer.assign(n + 1, 0.0);
  t.gap_floor.assign(n + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    t.layer[i] = (3.0 * sol.layer(i, J) - 4.0 * sol.layer(i, J - 1) + sol.layer(i, J - 2)) / (2.0 * dz);
    if (m.touching(i)) continue;
    const double g = m.height[i];
    t.plate[i] = (3.0 * sol.gap(i, N) - 4.0 * sol.gap(i, N - 1) + sol.gap(i, N - 2)) / (2.0 * deta) / g;
    t.gap_floor[i] = (-3.0 * sol.gap(i, 0) + 4.0 * sol.gap(i, 1) - sol.gap(i, 2)) / (2.0 * deta) / g;
  }
  return t;
}

std::vector<double> energy_gradient(const PotentialSolution& sol) {
  const CompositeMesh& mesh = sol.mesh;
  const int n = mesh.grid.n;
  const Numbering num{n, mesh.nz_layer, mesh.nz_gap};
  std::vector<double> grad(n + 1, 0.0);
  const std::array<double, 2> gp{-kGauss, kGauss};
  constexpr double step = 1e-30;
  using C = std::complex<double>;
  for (const Cell& c : cells(mesh, num)) {
    if (c.layer) continue;
    const int i = c.i;
    const int k = c.k;
    std::array<double, 4> psi;
    for (int a = 0; a < 4; ++a) psi[a] = sol.nodal[c.quad.node[a]];
    // Left column owns corners 0 and 3, the right column corners 1 and 2.
    for (int side = 0; side < 2; ++side) {
      const int col = i + side;
      if (col == 0 || col == n || mesh.touching(col)) continue;
      std::array<C, 4> qz;
      for (int a = 0; a < 4; ++a) qz[a] = C(c.quad.z[a], 0.0);
      const double eta_lo = mesh.gap_eta(k);
      const double eta_hi = mesh.gap_eta(k + 1);
      if (side == 0) {
        qz[0] += C(0.0, step * eta_lo);
        qz[3] += C(0.0, step * eta_hi);
      } else {
        qz[1] += C(0.0, step * eta_lo);
        qz[2] += C(0.0, step * eta_hi);
      }
      C quad = 0.0;
      for (double xi : gp) {
        for (double eta : gp) {
          const auto e = eval_shape_t<C>(c.quad.x, qz, xi, eta);
          C gx = 0.0;
          C gz = 0.0;
          for (int a = 0; a < 4; ++a) {
            gx += e.dx[a] * psi[a];
            gz += e.dz[a] * psi[a];
          }
          quad += sol.sigma2 * e.det * (gx * gx + gz * gz);
        }
      }
      grad[col] -= 0.5 * quad.imag() / step;
    }
  }
  return grad;
}

double flux_mismatch(const PotentialSolution& sol) {
  const Traces t = traces(sol);
  const int n = sol.mesh.grid.n;
  double worst = 0.0;
  for (int i = 1; i < n; ++i) {
    if (sol.mesh.touching(i)) continue;
    worst = std::max(worst, std::abs(sol.sigma1_interface[i] * t.layer[i] - sol.sigma2 * t.gap_floor[i]));
  }
  return worst;
}

double l2_error(const PotentialSolution& sol, const std::function<double(double, double)>& exact1,
                const std::function<double(double, double)>& exact2) {
  const CompositeMesh& mesh = sol.mesh;
  const Numbering num{mesh.grid.n, mesh.nz_layer, mesh.nz_gap};
  static constexpr std::array<double, 3> pts{-0.77459666924148337704, 0.0, 0.77459666924148337704};
  static constexpr std::array<double, 3> wts{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double sum = 0.0;
  for (const Cell& c : cells(mesh, num)) {
    const auto& exact = c.layer ? exact1 : exact2;
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) {
        const ShapeEval e = eval_shape(c.quad, pts[p], pts[q]);
        double v = 0.0;
        for (int a = 0; a < 4; ++a) v += e.N[a] * sol.nodal[c.quad.node[a]];
        const double diff = v - exact(e.x, e.z);
        sum += wts[p] * wts[q] * e.det * diff * diff;
      }
    }
  }
  return std::sqrt(sum);
}

}  // namespace memsflow
