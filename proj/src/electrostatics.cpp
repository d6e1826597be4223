#include "memsflow/electrostatics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace memsflow {

double electrostatic_energy(const PotentialSolution& sol) {
  double sum = 0.0;
  for (const auto& q : sol.energy_density) sum += q.weight * q.grad2;
  return -0.5 * sum;
}

double bilinear_energy(const PotentialSolution& sol) {
  return -0.5 * sol.nodal.dot(sol.stiffness * sol.nodal);
}

ForceProfile force(const PotentialSolution& sol, const BeamState& state) {
  const Traces t = traces(sol);
  const std::vector<double> slope = first_difference(state);
  const int nodes = state.grid.nodes();
  ForceProfile f;
  f.g.resize(nodes);
  f.branch.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    f.branch[i] = sol.mesh.columns[i];
    if (sol.mesh.touching(i)) {
      const double s1 = sol.sigma1_interface[i];
      f.g[i] = s1 * s1 / (2.0 * sol.sigma2) * t.layer[i] * t.layer[i];
    } else {
      f.g[i] = 0.5 * sol.sigma2 * (1.0 + slope[i] * slope[i]) * t.plate[i] * t.plate[i];
    }
  }
  return f;
}

Electrostatics::Evaluation Electrostatics::evaluate(const BeamState& state, ForceModel model) const {
  const CompositeMesh mesh = build_mesh(state, physical, numerical);
  Evaluation ev;
  ev.solution = solve(mesh, perm, bdata, numerical.tol_as);
  ev.energy = electrostatic_energy(ev.solution);
  ev.force = force(ev.solution, state);
  if (model == ForceModel::gradient) {
    // With touching columns, differentiate the state lifted to the threshold gap.
    // Pinning a column to the plate changes the field in its wedge cells, so the
    // force on the column and its neighbours would jump when a node lands and the
    // step iteration could cycle.
    PotentialSolution lifted_sol;
    const PotentialSolution* src = &ev.solution;
    const int n = state.grid.n;
    if (mesh.touching_count() > 0) {
      BeamState lifted = state;
      double v = numerical.eps_gap - physical.H;
      while (v + physical.H < numerical.eps_gap) v = std::nextafter(v, 1.0);
      for (int i = 1; i < n; ++i) {
        if (mesh.touching(i)) lifted.u[i] = v;
      }
      lifted_sol = solve(build_mesh(lifted, physical, numerical), perm, bdata, numerical.tol_as);
      src = &lifted_sol;
    }
    const std::vector<double> grad = energy_gradient(*src);
    for (int i = 1; i < n; ++i) ev.force.g[i] = grad[i] / state.grid.weight(i);
  }
  return ev;
}

double Electrostatics::energy(const BeamState& state) const {
  const CompositeMesh mesh = build_mesh(state, physical, numerical);
  return electrostatic_energy(solve(mesh, perm, bdata, numerical.tol_as));
}

Electrostatics make_electrostatics(const ValidatedConfig& config) {
  Electrostatics es;
  es.physical = config.physical;
  es.numerical = config.numerical;
  es.perm = make_permittivity(config);
  es.bdata = capacitor_boundary_data(es.perm, config.physical);
  return es;
}

std::vector<DirectionalRow> directional_derivative_check(const Electrostatics& es, const BeamState& u,
                                                         const BeamState& w,
                                                         const std::vector<double>& s_list) {
  const double H = es.physical.H;
  if (!u.is_admissible(H)) throw Error("directional_derivative_check: u is not admissible");
  std::vector<double> dir(u.u.size());
  for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = w.u[i] - u.u[i];
  for (double s : s_list) {
    for (std::size_t i = 0; i < dir.size(); ++i) {
      if (u.u[i] + s * dir[i] < -H) {
        std::ostringstream os;
        os << "directional_derivative_check: u + s(w-u) leaves the admissible set at s = " << s;
        throw Error(os.str());
      }
    }
  }
  const auto base = es.evaluate(u);
  std::vector<double> gd(dir.size());
  for (std::size_t i = 0; i < dir.size(); ++i) gd[i] = base.force.g[i] * dir[i];
  const double pairing = trapezoid(u.grid, gd);

  std::vector<DirectionalRow> rows;
  for (double s : s_list) {
    BeamState moved = u;
    for (std::size_t i = 0; i < dir.size(); ++i) moved.u[i] += s * dir[i];
    DirectionalRow r;
    r.s = s;
    r.quotient = (es.energy(moved) - base.energy) / s;
    r.pairing = pairing;
    const double diff = std::abs(r.quotient - pairing);
    if (pairing != 0.0) {
      r.rel_error = diff / std::abs(pairing);
    } else {
      r.rel_error = diff > 0.0 ? diff / std::abs(r.quotient) : 0.0;
    }
    rows.push_back(r);
  }
  return rows;
}

BeamState standard_direction(const BeamState& u, double H) {
  const BeamState b = clamped_bump(u.grid, 1.0);
  const double peak = b.max_abs();
  BeamState w = u;
  for (std::size_t i = 0; i < w.u.size(); ++i) w.u[i] -= H / 40.0 * b.u[i] / peak;
  return w;
}

double directional_tolerance(int n_x) {
  const double r = 64.0 / n_x;
  return 1e-2 * std::max(1.0, r * r);
}

}  // namespace memsflow
