#include "memsflow/diagnostics.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace memsflow {

CheckReport make_check(std::string name, double measured, double bound, double tolerance,
                       std::string context) {
  CheckReport r;
  r.name = std::move(name);
  r.measured = measured;
  r.bound = bound;
  r.tolerance = tolerance;
  r.context = std::move(context);
  r.passed = measured <= bound + tolerance;  // false for NaN
  return r;
}

bool all_passed(const std::vector<CheckReport>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed; });
}

FlatPlateOracle flat_plate_oracle(const ValidatedConfig& config, double w) {
  const PhysicalParams& p = config.physical;
  if (!(w > -p.H)) throw Error("flat_plate_oracle: w must exceed -H");
  const PermittivityModel perm = make_permittivity(config);
  const BoundaryDataModel bd = capacitor_boundary_data(perm, p);
  const double s2 = perm.sigma2;
  auto s1 = perm.sigma1;
  const double H = p.H;
  const double d = p.d;
  const double V = p.V;
  FlatPlateOracle o;
  o.psi1 = [bd, w](double x, double z) { return bd.h1(x, z, w).value; };
  o.psi2 = [bd, w](double x, double z) { return bd.h2(x, z, w).value; };
  o.plate_trace = [=](double x) {
    const double s = s1(x, -H);
    return V * s / (s2 * d + s * (H + w));
  };
  auto trace = o.plate_trace;
  o.force = [trace, s2](double x) {
    const double t = trace(x);
    return 0.5 * s2 * t * t;
  };
  // Composite Simpson over D of -V^2 s1 s2 / (2 (s2 d + s1 (H+w))).
  const int panels = 2048;
  const double hx = 2.0 * p.L / panels;
  double sum = 0.0;
  for (int k = 0; k <= panels; ++k) {
    const double x = -p.L + k * hx;
    const double s = s1(x, -H);
    const double f = -V * V * s * s2 / (2.0 * (s2 * d + s * (H + w)));
    const double c = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += c * f;
  }
  o.energy = sum * hx / 3.0;
  return o;
}

LedgerReport check_energy_ledger(const SimulationTrace& trace, const PhysicalParams& params,
                                 double tol_fp) {
  LedgerReport rep;
  const auto& r = trace.records;
  const double slack = 10.0 * tol_fp;
  const double c1 = trace.constants.c1;
  const double delta = trace.delta;
  if (r.empty()) {
    rep.checks.push_back(make_check("trace non-empty", 1.0, 0.0, 0.0));
    return rep;
  }
  const double E0 = r.front().energy.total;

  double worst_dec = -std::numeric_limits<double>::infinity();
  int worst_dec_at = -1;
  for (std::size_t n = 0; n + 1 < r.size(); ++n) {
    const double excess = r[n + 1].dissipation + r[n + 1].energy.total - r[n].energy.total;
    if (!(excess <= slack)) rep.decrease_failures.push_back(static_cast<int>(n));
    if (!(excess <= worst_dec)) {
      worst_dec = excess;
      worst_dec_at = static_cast<int>(n);
    }
  }
  if (worst_dec_at < 0) worst_dec = 0.0;
  rep.checks.push_back(make_check("per-step decrease", worst_dec, 0.0, slack,
                                  "worst step n = " + std::to_string(worst_dec_at)));
  if (!rep.decrease_failures.empty()) rep.checks.back().passed = false;

  // Cumulative inequality, floor, envelope and H2 bound: keep the state with
  // the largest excess over its bound.
  struct Worst {
    double excess = -std::numeric_limits<double>::infinity();
    double measured = 0.0;
    double bound = 0.0;
    double tol = 0.0;
    int at = -1;
    void offer(double m, double b, double t, int n) {
      const double e = m - b - t;
      if (!(e <= excess)) {
        excess = e;
        measured = m;
        bound = b;
        tol = t;
        at = n;
      }
    }
  } cumulative, floor, envelope, h2;

  const double l2_0 = r.front().l2_sq;
  for (std::size_t n = 0; n < r.size(); ++n) {
    const StepRecord& s = r[n];
    const double tol_n = static_cast<double>(n) * slack;
    const int idx = static_cast<int>(n);
    cumulative.offer(s.dissipation_cum + s.energy.total, E0, tol_n, idx);
    floor.offer(0.25 * params.beta * s.dxx_sq - c1 * (1.0 + s.l2_sq), s.energy.total, slack, idx);
    if (c1 > 0.0) {
      const double factor = 6.0 * l2_0 + 2.0 + 2.0 * E0 / c1;
      envelope.offer(s.l2_sq, factor * std::exp(16.0 * c1 * n * delta), 0.0, idx);
    }
    h2.offer(s.dissipation_cum + 0.25 * params.beta * s.dxx_sq, E0 + c1 * (1.0 + s.l2_sq), tol_n, idx);
  }
  auto emit = [&](const char* name, const Worst& w) {
    rep.checks.push_back(make_check(name, w.measured, w.bound, w.tol, "worst n = " + std::to_string(w.at)));
  };
  emit("cumulative energy inequality", cumulative);
  emit("lower energy bound", floor);
  if (c1 > 0.0) {
    emit("L2 growth envelope", envelope);
  } else {
    rep.checks.push_back(make_check("L2 growth envelope", 0.0, std::numeric_limits<double>::infinity(), 0.0,
                                    "c1 = 0: envelope is unbounded"));
  }
  emit("H2 bound", h2);
  return rep;
}

double localization_radius(double L, double H, double K) {
  if (!(K > 0.0)) return L / 2.0;
  return std::max(L - std::pow(H / (2.0 * K), 2.0 / 3.0), L / 2.0);
}

std::vector<CheckReport> check_multiplier(const StepResult& step, const ValidatedConfig& config, double K) {
  const PhysicalParams& p = config.physical;
  const NumericalParams& num = config.numerical;
  const BeamState& u = step.state;
  const double xT = localization_radius(p.L, p.H, K);
  double infeasible = -std::numeric_limits<double>::infinity();
  double max_zeta = -std::numeric_limits<double>::infinity();
  double comp = 0.0;
  double outside = 0.0;
  double reach = 0.0;
  for (int i = 0; i < u.grid.nodes(); ++i) {
    const double gap = u.u[i] + p.H;
    const double z = step.multiplier[i];
    infeasible = std::max(infeasible, -gap);
    max_zeta = std::max(max_zeta, z);
    comp = std::max(comp, std::abs(z * gap));
    if (z != 0.0) {
      if (!(gap < num.eps_gap)) outside += 1.0;
      reach = std::max(reach, std::abs(u.grid.x(i)));
    }
  }
  std::ostringstream kctx;
  kctx << "K = " << K << ", x_T = " << xT;
  return {
      make_check("feasibility", infeasible, 0.0, 0.0),
      make_check("multiplier sign", max_zeta, 0.0, num.tol_as),
      make_check("complementarity", comp, 0.0, num.tol_as),
      make_check("support in coincidence set", outside, 0.0, 0.0),
      make_check("support in [-x_T, x_T]", reach, xT, 0.0, kctx.str()),
      make_check("multiplier mass", step.multiplier_mass, std::numeric_limits<double>::infinity(), 0.0),
  };
}

double ConvergenceTable::min_order() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < levels.size(); ++k) m = std::min(m, levels[k].order);
  return m;
}

double ConvergenceTable::max_error() const {
  double m = 0.0;
  for (const auto& l : levels) m = std::max(m, l.error);
  return m;
}

namespace {

void fill_orders(ConvergenceTable& t) {
  for (std::size_t k = 1; k < t.levels.size(); ++k) {
    const double a = t.levels[k - 1].error;
    const double b = t.levels[k].error;
    t.levels[k].order = (a > 0.0 && b > 0.0) ? std::log2(a / b) : 0.0;
  }
}

// Fourth-order central difference.
template <class F>
double d4(F&& f, double x, double e) {
  return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * e);
}

}  // namespace

ManufacturedStudy manufactured_study(const PhysicalParams& g, int levels, int n0) {
  const double L = g.L;
  const double H = g.H;
  const double s2 = 2.0;
  auto sigma1 = [=](double x, double z) { return 1.5 + 0.3 * std::sin(x / L) + 0.2 * (z + H) / g.d; };
  auto s_top = [=](double x) { return sigma1(x, -H); };
  auto A = [=](double x) { return 0.3 + 0.2 * std::cos(1.3 * x / L); };
  auto B = [=](double x) { return 1.0 + 0.25 * std::sin(2.0 * x / L); };
  auto C = [=](double x) { return 0.3 * std::sin(1.7 * x / L + 0.2); };
  auto D = [=](double x) { return 0.2 * std::cos(0.9 * x / L); };
  // Continuity and flux matching hold at z = -H by construction.
  auto exact1 = [=](double x, double z) {
    const double y = z + H;
    return A(x) + s2 * B(x) * y + C(x) * y * y;
  };
  auto exact2 = [=](double x, double z) {
    const double y = z + H;
    return A(x) + s_top(x) * B(x) * y + D(x) * y * y;
  };
  const double e = 1e-3 * std::min(L, H);
  auto source1 = [=](double x, double z) {
    auto fx = [&](double xx) { return sigma1(xx, z) * d4([&](double t) { return exact1(t, z); }, xx, e); };
    auto fz = [&](double zz) { return sigma1(x, zz) * d4([&](double t) { return exact1(x, t); }, zz, e); };
    return -(d4(fx, x, e) + d4(fz, z, e));
  };
  auto source2 = [=](double x, double z) {
    auto fx = [&](double xx) { return d4([&](double t) { return exact2(t, z); }, xx, e); };
    auto fz = [&](double zz) { return d4([&](double t) { return exact2(x, t); }, zz, e); };
    return -s2 * (d4(fx, x, e) + d4(fz, z, e));
  };

  ManufacturedStudy out;
  out.l2.name = "manufactured potential, L2";
  out.flux.name = "manufactured interface flux mismatch";
  for (int k = 0; k < levels; ++k) {
    const int n = n0 << k;
    const int nz = std::max(4, n / 4);
    const BeamGrid grid{L, n};
    BeamState plate = clamped_bump(grid, -0.3 * H);
    NumericalParams num;
    num.n_x = n;
    num.n_z_layer = nz;
    num.n_eta_gap = nz;
    num.eps_gap = 1e-6 * H;
    const CompositeMesh mesh = build_mesh(plate, g, num);
    TransmissionProblem prob;
    prob.sigma1 = sigma1;
    prob.sigma2 = s2;
    prob.layer_boundary = [=](int, double x, double z) { return exact1(x, z); };
    prob.gap_boundary = [=](int, double x, double z) { return exact2(x, z); };
    const std::vector<double> u = plate.u;
    prob.plate = [=](int i, double x) { return exact2(x, u[i]); };
    prob.source1 = source1;
    prob.source2 = source2;
    const PotentialSolution sol = solve(mesh, prob, 1e-12);
    out.l2.levels.push_back({n, nz, l2_error(sol, exact1, exact2), 0.0});
    out.flux.levels.push_back({n, nz, flux_mismatch(sol), 0.0});
  }
  fill_orders(out.l2);
  fill_orders(out.flux);
  return out;
}

ConvergenceTable flat_plate_study(const ValidatedConfig& config, int levels, int n0) {
  ConvergenceTable t;
  t.name = "flat-plate force, sup error";
  const FlatPlateOracle o = flat_plate_oracle(config, 0.0);
  for (int k = 0; k < levels; ++k) {
    ValidatedConfig c = config;
    const int n = n0 << k;
    c.numerical.n_x = n;
    c.numerical.n_z_layer = std::max(4, n / 4);
    c.numerical.n_eta_gap = std::max(4, n / 4);
    const Electrostatics es = make_electrostatics(c);
    BeamState flat(BeamGrid{c.physical.L, n}, std::vector<double>(n + 1, 0.0));
    const auto ev = es.evaluate(flat);
    double err = 0.0;
    for (int i = 1; i < n; ++i) err = std::max(err, std::abs(ev.force.g[i] - o.force(flat.grid.x(i))));
    t.levels.push_back({n, c.numerical.n_z_layer, err, 0.0});
  }
  return t;
}

SteadyState steady_state(const Scheme& scheme, double tol, int max_iter, double omega) {
  const PhysicalParams& p = scheme.config.physical;
  const BeamGrid grid{p.L, scheme.config.numerical.n_x};
  const int m = grid.n - 1;
  const Eigen::SparseMatrix<double> bend = scheme.ops.bending();
  const Eigen::SparseMatrix<double> stretch = scheme.ops.stretching();
  SteadyState out;
  out.state = BeamState(grid);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  for (int it = 1; it <= max_iter; ++it) {
    const BeamState s = from_interior(grid, v);
    if (!s.is_admissible(p.H)) throw Error("steady_state: iterate left the admissible set");
    const auto ev = scheme.electrostatics.evaluate(s, scheme.force_model);
    const H2Norms nk = h2_seminorms(s);
    const Eigen::SparseMatrix<double> K = p.beta * bend + (p.tau + p.a * nk.dx * nk.dx) * stretch;
    Eigen::VectorXd rhs(m);
    for (int k = 0; k < m; ++k) rhs[k] = -grid.weight(k + 1) * ev.force.g[k + 1];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    Eigen::VectorXd target = ldlt.solve(rhs);
    target += ldlt.solve(rhs - K * target);
    const Eigen::VectorXd next = v + omega * (target - v);
    out.increment = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    out.iterations = it;
    if (out.increment <= tol) {
      out.state = from_interior(grid, v);
      return out;
    }
  }
  std::ostringstream os;
  os << "steady_state: no convergence in " << max_iter << " iterations (last update " << out.increment << ")";
  throw Error(os.str());
}

double steady_residual(const Scheme& scheme, const BeamState& u) {
  const PhysicalParams& p = scheme.config.physical;
  const Eigen::VectorXd v = interior(u);
  const H2Norms nk = h2_seminorms(u);
  const Eigen::VectorXd Ku =
      p.beta * (scheme.ops.bending() * v) + (p.tau + p.a * nk.dx * nk.dx) * (scheme.ops.stretching() * v);
  const auto ev = scheme.electrostatics.evaluate(u, scheme.force_model);
  double worst = 0.0;
  for (int k = 0; k < static_cast<int>(v.size()); ++k) {
    worst = std::max(worst, std::abs(Ku[k] / u.grid.weight(k + 1) + ev.force.g[k + 1]));
  }
  return worst;
}

ConvergenceTable steady_study(const ValidatedConfig& config, int levels, int n0) {
  ConvergenceTable t;
  t.name = "steady deflection, sup difference of successive levels";
  std::vector<BeamState> states;
  for (int k = 0; k < levels; ++k) {
    ValidatedConfig c = config;
    const int n = n0 << k;
    c.numerical.n_x = n;
    c.numerical.n_z_layer = std::max(4, n / 4);
    c.numerical.n_eta_gap = std::max(4, n / 4);
    states.push_back(steady_state(make_scheme(c)).state);
  }
  for (int k = 0; k + 1 < levels; ++k) {
    const BeamState& a = states[k];
    const BeamState& b = states[k + 1];
    double diff = 0.0;
    for (int i = 0; i < a.grid.nodes(); ++i) diff = std::max(diff, std::abs(a.u[i] - b.u[2 * i]));
    t.levels.push_back({a.grid.n, std::max(4, a.grid.n / 4), diff, 0.0});
  }
  fill_orders(t);
  return t;
}

RefinementStudy delta_refinement(const Scheme& scheme, const BeamState& u0,
                                 const std::vector<double>& deltas, double t) {
  RefinementStudy st;
  st.deltas = deltas;
  std::vector<BeamState> finals;
  for (double dt : deltas) {
    const SimulationTrace tr = run(scheme, u0, dt, t);
    if (!tr.completed) throw Error("delta_refinement: run failed: " + tr.error);
    finals.push_back(tr.final_state());
  }
  for (std::size_t k = 0; k + 1 < finals.size(); ++k) {
    std::vector<double> diff(finals[k].u.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = finals[k].u[i] - finals[k + 1].u[i];
    const double dist = std::sqrt(trapezoid_squared(finals[k].grid, diff));
    st.distances.push_back(dist);
    st.constants.push_back(dist / deltas[k]);
  }
  for (std::size_t k = 1; k < st.distances.size(); ++k) {
    st.ratios.push_back(st.distances[k - 1] > 0.0 ? st.distances[k] / st.distances[k - 1] : 0.0);
  }
  return st;
}

StabilityReport force_stability(const Scheme& scheme, int samples, double size, unsigned seed) {
  const PhysicalParams& p = scheme.config.physical;
  const BeamGrid grid{p.L, scheme.config.numerical.n_x};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const BeamState bump = clamped_bump(grid, 1.0);
  auto shaped = [&](double c0, double c1, double c2) {
    BeamState s(grid);
    for (int i = 0; i < grid.nodes(); ++i) {
      const double x = grid.x(i) / p.L;
      s.u[i] = bump.u[i] * (c0 + c1 * x + c2 * x * x);
    }
    return s;
  };
  auto force_l2 = [&](const std::vector<double>& g) { return std::sqrt(trapezoid_squared(grid, g)); };
  StabilityReport rep;
  for (int k = 0; k < samples; ++k) {
    BeamState u = shaped(coef(rng), coef(rng), coef(rng));
    const double lo = u.min();
    const double peak = u.max_abs();
    // Keep the sample well inside the admissible set.
    if (peak > 0.0) {
      const double scale = 0.5 * p.H / std::max(peak, -lo);
      for (double& v : u.u) v *= scale;
    }
    BeamState du = shaped(coef(rng), coef(rng), 0.0);
    const double norm = h2_seminorms(du).h2();
    for (double& v : du.u) v *= size / norm;
    BeamState moved = u;
    for (std::size_t i = 0; i < u.u.size(); ++i) moved.u[i] += du.u[i];
    const auto a = scheme.electrostatics.evaluate(u, scheme.force_model).force.g;
    const auto b = scheme.electrostatics.evaluate(moved, scheme.force_model).force.g;
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = b[i] - a[i];
    rep.max_ratio = std::max(rep.max_ratio, std::abs(force_l2(b) - force_l2(a)) / size);
    rep.max_change = std::max(rep.max_change, force_l2(diff) / size);
    ++rep.samples;
  }
  return rep;
}

std::vector<CheckReport> gradient_checks(const Electrostatics& es, std::vector<DirectionalRow>* rows_out) {
  const int n = es.numerical.n_x;
  const BeamState u(BeamGrid{es.physical.L, n});
  const BeamState w = standard_direction(u, es.physical.H);
  const auto rows = directional_derivative_check(es, u, w, {1e-2, 1e-3, 1e-4});
  if (rows_out) *rows_out = rows;
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) floor = std::min(floor, r.rel_error);
  floor *= 2.0;
  double worst_rise = 0.0;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    if (rows[k].rel_error > floor) worst_rise = std::max(worst_rise, rows[k + 1].rel_error - rows[k].rel_error);
  }
  std::ostringstream ctx;
  ctx << "n_x = " << n;
  return {
      make_check("directional derivative at s = 1e-3", rows[1].rel_error, directional_tolerance(n), 0.0, ctx.str()),
      make_check("directional error decreases with s", worst_rise, 0.0, 0.0, ctx.str()),
  };
}

std::vector<CheckReport> worst_of(const std::vector<std::vector<CheckReport>>& reports) {
  std::vector<CheckReport> out;
  for (const auto& rep : reports) {
    if (out.empty()) {
      out = rep;
      continue;
    }
    for (std::size_t k = 0; k < rep.size() && k < out.size(); ++k) {
      const CheckReport& c = rep[k];
      CheckReport& w = out[k];
      const bool any_failed = !w.passed || !c.passed;
      if (!(c.measured - c.bound - c.tolerance <= w.measured - w.bound - w.tolerance)) w = c;
      w.passed = !any_failed;
    }
  }
  return out;
}

std::vector<CheckReport> RunAudit::checks() const {
  std::vector<CheckReport> all = ledger.checks;
  all.insert(all.end(), multiplier.begin(), multiplier.end());
  all.push_back(make_check("run completed", trace.completed ? 0.0 : 1.0, 0.0, 0.0, trace.error));
  return all;
}

bool RunAudit::passed() const { return all_passed(checks()); }

RunAudit audit_run(const Scheme& scheme, const BeamState& u0, double delta, double t_end, RunOptions options) {
  struct Kept {
    int n;
    StepResult r;
  };
  std::vector<Kept> kept;
  auto user = options.on_step;
  options.on_step = [&](int n, const StepResult& r) {
    if (user) user(n, r);
    StepResult light;
    light.state = r.state;
    light.multiplier = r.multiplier;
    light.multiplier_mass = r.multiplier_mass;
    light.complementarity = r.complementarity;
    kept.push_back({n, std::move(light)});
  };
  RunAudit audit;
  audit.trace = run(scheme, u0, delta, t_end, options);
  audit.ledger = check_energy_ledger(audit.trace, scheme.config.physical, scheme.config.numerical.tol_fp);
  for (const auto& r : audit.trace.records) audit.K = std::max(audit.K, std::sqrt(r.h2_sq));
  const PhysicalParams& p = scheme.config.physical;
  audit.x_T = localization_radius(p.L, p.H, audit.K);
  std::vector<std::vector<CheckReport>> per_step;
  per_step.reserve(kept.size());
  for (const Kept& k : kept) {
    auto checks = check_multiplier(k.r, scheme.config, audit.K);
    for (auto& c : checks) c.context = "step " + std::to_string(k.n) + (c.context.empty() ? "" : ", " + c.context);
    per_step.push_back(std::move(checks));
  }
  if (per_step.empty()) {
    StepResult none;
    none.state = u0;
    none.multiplier.assign(u0.u.size(), 0.0);
    per_step.push_back(check_multiplier(none, scheme.config, audit.K));
  }
  audit.multiplier = worst_of(per_step);
  return audit;
}

}  // namespace memsflow
