#include "memsflow/minimizing_movements.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace memsflow {

SchemeConstants lower_bound_constant(const PhysicalParams& p, double sigma_max, const MConstants& m) {
  if (!(p.L > 0) || !(p.d > 0) || !(p.beta > 0) || !(sigma_max > 0)) {
    throw Error("lower_bound_constant: L, d, beta and sigma_max must be positive");
  }
  if (m.m1 < 0 || m.m2 < 0 || m.m3 < 0) throw Error("lower_bound_constant: m-constants must be non-negative");
  SchemeConstants c;
  c.m = m;
  const double s = (p.d + 1.0) * sigma_max;
  c.A = 3.0 * p.L * m.m1 * s;
  c.B = 1.5 * m.m2 * s;
  c.K = s * m.m3;
  const double young = c.K * c.K / p.beta;
  c.c1 = std::max(c.A + young, c.B + young);
  c.delta0 = delta0_for(c.c1);
  return c;
}

double delta0_for(double c1) {
  if (c1 <= 0.0) return 1.0;
  return std::min(1.0, 1.0 / (16.0 * c1));
}

Scheme make_scheme(const ValidatedConfig& config, ForceModel force_model) {
  Scheme s;
  s.config = config;
  s.electrostatics = make_electrostatics(config);
  const MConstants m = estimate_m_constants(s.electrostatics.bdata, config.dielectric.w_max);
  s.constants = lower_bound_constant(config.physical, s.electrostatics.perm.sigma_max, m);
  s.ops = beam_operators(BeamGrid{config.physical.L, config.numerical.n_x});
  s.force_model = force_model;
  return s;
}

EnergyBreakdown Scheme::energy(const BeamState& state, const Electrostatics::Evaluation& ev) const {
  EnergyBreakdown e;
  e.mechanical = mechanical_energy(state, config.physical);
  e.electrostatic = ev.energy;
  e.total = e.mechanical + e.electrostatic;
  return e;
}

EnergyBreakdown Scheme::energy(const BeamState& state) const {
  return energy(state, electrostatics.evaluate(state, force_model));
}

namespace {

struct ObstacleResult {
  Eigen::VectorXd v;
  Eigen::VectorXd lambda;  // >= 0 on the active set
  std::vector<char> active;
  int iters = 0;
};

// min 1/2 v^T Q v - b^T v subject to v >= lower, by primal-dual active set.
ObstacleResult solve_obstacle(const Eigen::SparseMatrix<double>& Q, const Eigen::VectorXd& b, double lower,
                              std::vector<char> active, int max_iter) {
  const int m = static_cast<int>(b.size());
  ObstacleResult r;
  r.v = Eigen::VectorXd::Constant(m, lower);
  r.lambda = Eigen::VectorXd::Zero(m);
  if (static_cast<int>(active.size()) != m) active.assign(m, 0);
  for (int it = 1; it <= max_iter; ++it) {
    std::vector<int> map(m, -1);
    int free_count = 0;
    for (int i = 0; i < m; ++i) {
      if (!active[i]) map[i] = free_count++;
    }
    Eigen::VectorXd v = Eigen::VectorXd::Constant(m, lower);
    if (free_count > 0) {
      std::vector<Eigen::Triplet<double>> t;
      Eigen::VectorXd rhs(free_count);
      for (int i = 0; i < m; ++i) {
        if (map[i] >= 0) rhs[map[i]] = b[i];
      }
      for (int col = 0; col < Q.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator q(Q, col); q; ++q) {
          const int ri = map[q.row()];
          if (ri < 0) continue;
          const int ci = map[q.col()];
          if (ci >= 0) {
            t.emplace_back(ri, ci, q.value());
          } else {
            rhs[ri] -= q.value() * lower;
          }
        }
      }
      Eigen::SparseMatrix<double> Qff(free_count, free_count);
      Qff.setFromTriplets(t.begin(), t.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Qff);
      if (ldlt.info() != Eigen::Success) throw StepError("obstacle solve: factorization failed");
      Eigen::VectorXd vf = ldlt.solve(rhs);
      vf += ldlt.solve(rhs - Qff * vf);
      for (int i = 0; i < m; ++i) {
        if (map[i] >= 0) v[i] = vf[map[i]];
      }
    }
    Eigen::VectorXd lambda = Q * v - b;
    for (int i = 0; i < m; ++i) {
      if (!active[i]) lambda[i] = 0.0;
    }
    // Update with c = 1: active iff lambda - (v - lower) > 0.
    std::vector<char> next(m, 0);
    for (int i = 0; i < m; ++i) next[i] = (lambda[i] - (v[i] - lower) > 0.0) ? 1 : 0;
    r.v = v;
    r.lambda = lambda;
    r.iters = it;
    if (next == active) {
      r.active = active;
      return r;
    }
    active = std::move(next);
  }
  std::ostringstream os;
  os << "obstacle solve: active set did not settle in " << max_iter << " iterations";
  throw StepError(os.str());
}

double sup_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>();
}

}  // namespace

StepResult Scheme::step(const BeamState& un, double delta,
                        const std::optional<Electrostatics::Evaluation>& at_un) const {
  const PhysicalParams& p = config.physical;
  const NumericalParams& num = config.numerical;
  const BeamGrid grid = un.grid;
  if (!un.is_admissible(p.H)) throw StepError("step: u_n is not admissible");
  if (!(delta > 0)) throw StepError("step: delta must be positive");
  const int m = grid.n - 1;

  Eigen::VectorXd w(m);
  for (int k = 0; k < m; ++k) w[k] = grid.weight(k + 1);
  const Eigen::VectorXd u_old = interior(un);
  const Eigen::SparseMatrix<double> bend = ops.bending();
  const Eigen::SparseMatrix<double> stretch = ops.stretching();
  Eigen::SparseMatrix<double> mass(m, m);
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < m; ++k) t.emplace_back(k, k, w[k] / delta);
    mass.setFromTriplets(t.begin(), t.end());
  }

  const Electrostatics::Evaluation start = at_un ? *at_un : electrostatics.evaluate(un, force_model);
  const double E_old = energy(un, start).total;

  Eigen::VectorXd v = u_old;
  ForceProfile g = start.force;
  std::vector<char> active(m, 0);
  for (int k = 0; k < m; ++k) active[k] = un.u[k + 1] == -p.H ? 1 : 0;

  StepResult res;
  constexpr double kThetaMin = 1.0 / 64;
  double theta = num.theta;
  double prev_res = std::numeric_limits<double>::infinity();
  int increases = 0;
  ObstacleResult ob;
  bool converged = false;
  for (int it = 1; it <= num.max_fp; ++it) {
    const BeamState vk = from_interior(grid, v);
    if (it > 1) g = electrostatics.evaluate(vk, force_model).force;
    const H2Norms nk = h2_seminorms(vk);
    const double c = p.tau + p.a * nk.dx * nk.dx;
    const Eigen::SparseMatrix<double> Q = mass + p.beta * bend + c * stretch;
    Eigen::VectorXd b(m);
    for (int k = 0; k < m; ++k) b[k] = w[k] * (u_old[k] / delta - g.g[k + 1]);
    ob = solve_obstacle(Q, b, -p.H, active, num.max_as);
    active = ob.active;
    res.as_iters += ob.iters;
    const double r = sup_distance(ob.v, v);
    res.fp_iters = it;
    res.fp_residual = r;
    if (r <= num.tol_fp) {
      converged = true;
      break;
    }
    if (r > prev_res) {
      if (++increases >= 2) {
        theta = std::max(0.5 * theta, kThetaMin);
        increases = 0;
      }
    } else {
      increases = 0;
    }
    prev_res = r;
    v += theta * (ob.v - v);
  }
  res.theta = theta;
  if (!converged) {
    std::ostringstream os;
    os << "step: fixed point did not converge in " << num.max_fp << " iterations (residual "
       << res.fp_residual << ", theta " << theta << ", delta " << delta << ", min gap "
       << (from_interior(grid, v).min() + p.H) << ")";
    throw StepError(os.str());
  }

  // Accept the last obstacle solution; it is feasible and carries the dual.
  BeamState next = from_interior(grid, ob.v);
  auto ev = electrostatics.evaluate(next, force_model);
  EnergyBreakdown e_next = energy(next, ev);
  auto dissipation_of = [&](const BeamState& s) {
    std::vector<double> diff(s.u.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = s.u[i] - un.u[i];
    return trapezoid_squared(grid, diff) / (2.0 * delta);
  };
  double diss = dissipation_of(next);
  const double slack = 10.0 * num.tol_fp;
  double lambda = 1.0;
  while (diss + e_next.total > E_old + slack) {
    lambda *= 0.5;
    if (lambda < 1e-8) {
      std::ostringstream os;
      os << "step: energy decrease backtracking exhausted (F(u_n+1) - E(u_n) = "
         << (diss + e_next.total - E_old) << ")";
      throw StepError(os.str());
    }
    BeamState trial = un;
    for (std::size_t i = 0; i < trial.u.size(); ++i) trial.u[i] += lambda * (next.u[i] - un.u[i]);
    ev = electrostatics.evaluate(trial, force_model);
    e_next = energy(trial, ev);
    diss = dissipation_of(trial);
    if (diss + e_next.total <= E_old + slack) {
      next = trial;
      break;
    }
  }
  res.backtrack = lambda;
  res.decrease_excess = diss + e_next.total - E_old;
  res.decrease_ok = res.decrease_excess <= slack;

  res.multiplier.assign(grid.nodes(), 0.0);
  res.active.assign(grid.nodes(), 0);
  if (lambda == 1.0) {
    for (int k = 0; k < m; ++k) {
      res.multiplier[k + 1] = -ob.lambda[k] / w[k];
      res.active[k + 1] = ob.active[k];
    }
  } else {
    // Off the KKT point: report the stationarity residual of the accepted state.
    const Eigen::VectorXd vi = interior(next);
    const H2Norms nn = h2_seminorms(next);
    const double c = p.tau + p.a * nn.dx * nn.dx;
    const Eigen::VectorXd grad = mass * (vi - u_old) + p.beta * (bend * vi) + c * (stretch * vi);
    for (int k = 0; k < m; ++k) {
      res.multiplier[k + 1] = -(grad[k] / w[k] + ev.force.g[k + 1]);
      res.active[k + 1] = next.u[k + 1] == -p.H ? 1 : 0;
    }
  }
  res.complementarity = 0.0;
  res.multiplier_mass = 0.0;
  for (int i = 0; i < grid.nodes(); ++i) {
    res.complementarity = std::max(res.complementarity, std::abs(res.multiplier[i] * (next.u[i] + p.H)));
    res.multiplier_mass += -res.multiplier[i] * grid.weight(i);
  }
  res.velocity.resize(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) res.velocity[i] = (next.u[i] - un.u[i]) / delta;
  res.energy = e_next;
  res.dissipation = diss;
  res.force = ev.force;
  res.evaluation = std::move(ev);
  res.state = std::move(next);
  return res;
}

BeamState initial_state(const ValidatedConfig& config) {
  const BeamGrid grid{config.physical.L, config.numerical.n_x};
  const auto& ic = config.initial;
  BeamState s(grid);
  switch (ic.profile) {
    case InitialProfile::zero:
      break;
    case InitialProfile::bump:
      s = clamped_bump(grid, ic.amplitude);
      break;
    case InitialProfile::table: {
      std::ifstream in(ic.table_path);
      if (!in) throw ConfigError("cannot read u0_table " + ic.table_path);
      std::vector<std::pair<double, double>> pts;
      std::string line;
      while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        double x = 0.0;
        double u = 0.0;
        if (!(ls >> x)) continue;
        if (!(ls >> u)) throw ConfigError("u0_table: malformed line '" + line + "'");
        pts.emplace_back(x, u);
      }
      if (pts.size() < 2) throw ConfigError("u0_table needs at least two points");
      std::sort(pts.begin(), pts.end());
      const double tol = 1e-9 * grid.L;
      if (pts.front().first > -grid.L + tol || pts.back().first < grid.L - tol) {
        throw ConfigError("u0_table must cover [-L, L]");
      }
      for (int i = 0; i < grid.nodes(); ++i) {
        const double x = grid.x(i);
        auto hi = std::lower_bound(pts.begin(), pts.end(), std::make_pair(x, -1e300));
        if (hi == pts.begin()) {
          s.u[i] = hi->second;
        } else if (hi == pts.end()) {
          s.u[i] = pts.back().second;
        } else {
          auto lo = hi - 1;
          const double t = (x - lo->first) / (hi->first - lo->first);
          s.u[i] = lo->second + t * (hi->second - lo->second);
        }
      }
      break;
    }
  }
  std::vector<std::string> problems;
  if (!s.is_clamped()) problems.push_back("initial deflection must vanish at both ends");
  if (!s.is_admissible(config.physical.H)) problems.push_back("initial deflection must satisfy u >= -H");
  if (!problems.empty()) throw ConfigError(problems);
  return s;
}

namespace {

StepRecord make_record(int n, double t, const BeamState& u, const EnergyBreakdown& e, double H) {
  StepRecord r;
  r.index = n;
  r.t = t;
  r.energy = e;
  r.min_gap = u.min() + H;
  for (double v : u.u) r.coincidence_count += (v == -H) ? 1 : 0;
  const H2Norms norms = h2_seminorms(u);
  r.l2_sq = norms.l2 * norms.l2;
  r.dxx_sq = norms.dxx * norms.dxx;
  const double h2 = norms.h2();
  r.h2_sq = h2 * h2;
  return r;
}

}  // namespace

SimulationTrace run(const Scheme& scheme, const BeamState& u0, double delta, double t_end,
                    const RunOptions& options) {
  const double H = scheme.config.physical.H;
  SimulationTrace trace;
  trace.delta = delta;
  trace.constants = scheme.constants;
  trace.delta_exceeds_delta0 = delta > scheme.constants.delta0;
  if (!u0.is_admissible(H)) throw Error("run: u_0 is not admissible");
  if (!(delta > 0) || !(t_end >= 0)) throw Error("run: delta must be positive and t_end non-negative");
  const int steps = static_cast<int>(std::ceil(t_end / delta - 1e-9));

  auto ev = scheme.electrostatics.evaluate(u0, scheme.force_model);
  StepRecord first = make_record(0, 0.0, u0, scheme.energy(u0, ev), H);
  first.coincidence_count = ev.solution.mesh.touching_count();
  trace.records.push_back(first);
  trace.times.push_back(0.0);
  trace.state_index.push_back(0);
  trace.states.push_back(u0);
  trace.multipliers.emplace_back(u0.u.size(), 0.0);
  if (first.coincidence_count > 0) trace.touchdown_step = 0;

  BeamState u = u0;
  double cum = 0.0;
  for (int n = 1; n <= steps; ++n) {
    StepResult r;
    try {
      r = scheme.step(u, delta, ev);
    } catch (const Error& err) {
      std::ostringstream os;
      os << "step " << n << ": " << err.what();
      trace.error = os.str();
      if (trace.state_index.back() != n - 1) {
        trace.state_index.push_back(n - 1);
        trace.states.push_back(u);
        trace.multipliers.emplace_back(u.u.size(), 0.0);
      }
      return trace;
    }
    cum += r.dissipation;
    const double t = n * delta;
    StepRecord rec = make_record(n, t, r.state, r.energy, H);
    rec.dissipation = r.dissipation;
    rec.dissipation_cum = cum;
    rec.coincidence_count = 0;
    for (Column c : r.force.branch) rec.coincidence_count += (c == Column::touching) ? 1 : 0;
    rec.multiplier_mass = r.multiplier_mass;
    rec.fp_iters = r.fp_iters;
    rec.as_iters = r.as_iters;
    rec.backtrack = r.backtrack;
    rec.decrease_ok = r.decrease_ok;
    rec.decrease_excess = r.decrease_excess;
    rec.complementarity = r.complementarity;
    trace.records.push_back(rec);
    trace.times.push_back(t);
    if (trace.touchdown_step < 0 && rec.coincidence_count > 0) trace.touchdown_step = n;
    if (options.on_step) options.on_step(n, r);
    const bool keep = options.keep_all_states || n == steps ||
                      (options.snapshot_every > 0 && n % options.snapshot_every == 0);
    if (keep) {
      trace.state_index.push_back(n);
      trace.states.push_back(r.state);
      trace.multipliers.push_back(r.multiplier);
    }
    u = r.state;
    ev = std::move(r.evaluation);
  }
  trace.completed = true;
  return trace;
}

}  // namespace memsflow
