#include "memsflow/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "memsflow/io.hpp"

#ifndef MEMSFLOW_VERSION
#define MEMSFLOW_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace memsflow {

std::string version() { return MEMSFLOW_VERSION; }

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json checks_json(const std::vector<CheckReport>& checks) {
  json arr = json::array();
  for (const auto& c : checks) {
    json j;
    j["name"] = c.name;
    j["passed"] = c.passed;
    // Non-finite bounds are written as strings.
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); };
    j["measured"] = num(c.measured);
    j["bound"] = num(c.bound);
    j["tolerance"] = num(c.tolerance);
    j["context"] = c.context;
    arr.push_back(j);
  }
  return arr;
}

json config_json(const ValidatedConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : to_raw(cfg)) j[k] = v;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

double step_size(const ValidatedConfig& cfg, const Scheme& scheme) {
  return cfg.numerical.delta ? *cfg.numerical.delta : scheme.constants.delta0;
}

void warn_delta(std::ostream& err, double delta, const SchemeConstants& c) {
  if (delta > c.delta0) {
    err << "warning: delta = " << delta << " exceeds delta0 = " << c.delta0
        << "; the step-size condition of the existence scheme does not hold\n";
  }
}

Snapshot make_snapshot(int n, double t, const BeamState& u, const std::vector<double>& zeta,
                       const PotentialSolution* sol) {
  Snapshot s;
  s.step = n;
  s.t = t;
  s.state = u;
  s.multiplier = zeta;
  if (sol) {
    s.n_z_layer = sol->mesh.nz_layer;
    s.n_eta_gap = sol->mesh.nz_gap;
    s.psi1 = sol->psi1;
    s.phi2 = sol->phi2;
  }
  return s;
}

struct Outcome {
  RunAudit audit;
  std::vector<std::string> files;
};

// Runs one configuration into `dir` and writes the trace, snapshots,
// diagnostics and manifest.
Outcome simulate_into(const ValidatedConfig& cfg, const fs::path& dir, std::ostream& err) {
  const std::string started = utc_now();
  const auto wall0 = std::chrono::steady_clock::now();
  const Scheme scheme = make_scheme(cfg);
  const BeamState u0 = initial_state(cfg);
  const double delta = step_size(cfg, scheme);
  warn_delta(err, delta, scheme.constants);

  fs::create_directories(dir);
  Outcome out;
  const int every = cfg.numerical.snapshot_every;
  RunOptions opts;
  opts.snapshot_every = every;
  if (every > 0) {
    fs::create_directories(dir / "snapshots");
    auto name = [](int n) {
      std::ostringstream os;
      os << "snapshots/step_" << std::setw(6) << std::setfill('0') << n << ".json";
      return os.str();
    };
    const auto ev0 = scheme.electrostatics.evaluate(u0, scheme.force_model);
    write_snapshot((dir / name(0)).string(),
                   make_snapshot(0, 0.0, u0, std::vector<double>(u0.u.size(), 0.0), &ev0.solution));
    out.files.push_back(name(0));
    opts.on_step = [&, every, delta](int n, const StepResult& r) {
      if (n % every != 0) return;
      write_snapshot((dir / name(n)).string(),
                     make_snapshot(n, n * delta, r.state, r.multiplier, &r.evaluation.solution));
      out.files.push_back(name(n));
    };
  }
  out.audit = audit_run(scheme, u0, delta, cfg.numerical.t_end, opts);
  const SimulationTrace& tr = out.audit.trace;

  write_trace_csv((dir / "trace.csv").string(), tr);
  out.files.push_back("trace.csv");

  const auto checks = out.audit.checks();
  json diag;
  diag["checks"] = checks_json(checks);
  diag["passed"] = all_passed(checks);
  diag["decrease_failures"] = out.audit.ledger.decrease_failures;
  diag["H2_bound_K"] = out.audit.K;
  diag["x_T"] = out.audit.x_T;
  diag["c1"] = scheme.constants.c1;
  diag["delta0"] = scheme.constants.delta0;
  diag["m_constants"] = {{"m1", scheme.constants.m.m1}, {"m2", scheme.constants.m.m2},
                         {"m3", scheme.constants.m.m3}, {"w_max", scheme.constants.m.w_max}};
  write_text(dir / "diagnostics.json", diag.dump(2) + "\n");
  out.files.push_back("diagnostics.json");

  json man;
  man["version"] = version();
  man["config"] = config_json(cfg);
  man["defaulted"] = cfg.defaulted;
  man["start_time"] = started;
  man["end_time"] = utc_now();
  man["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  man["delta"] = delta;
  man["delta0"] = scheme.constants.delta0;
  man["delta_exceeds_delta0"] = tr.delta_exceeds_delta0;
  man["steps"] = static_cast<int>(tr.records.size()) - 1;
  man["completed"] = tr.completed;
  man["error"] = tr.error;
  if (tr.touchdown_step >= 0) {
    man["coincidence_onset"] = {{"step", tr.touchdown_step}, {"t", tr.times[tr.touchdown_step]}};
  } else {
    man["coincidence_onset"] = nullptr;
  }
  json failed = json::array();
  for (const auto& c : checks) {
    if (!c.passed) failed.push_back(c.name);
  }
  man["checks"] = {{"passed", failed.empty()}, {"failed", failed}, {"count", checks.size()}};
  std::vector<std::string> files = out.files;
  files.push_back("manifest.json");
  man["files"] = files;
  write_text(dir / "manifest.json", man.dump(2) + "\n");
  out.files.push_back("manifest.json");
  return out;
}

ValidatedConfig load(const std::string& path) { return validate_config(read_config_file(path)); }

int report_config_error(std::ostream& err, const ConfigError& e) {
  err << "configuration error:\n";
  for (const auto& v : e.violations()) err << "  " << v << '\n';
  return kExitConfig;
}

int cmd_validate(const std::string& path, bool quiet, std::ostream& out, std::ostream& err) {
  const ValidatedConfig cfg = load(path);
  const Scheme scheme = make_scheme(cfg);
  const double delta = step_size(cfg, scheme);
  warn_delta(err, delta, scheme.constants);
  if (!quiet) {
    const auto raw = to_raw(cfg);
    for (const auto& key : config_keys()) {
      auto it = raw.find(key);
      if (it == raw.end()) continue;
      const bool dflt = std::find(cfg.defaulted.begin(), cfg.defaulted.end(), key) != cfg.defaulted.end();
      out << key << " = " << it->second << (dflt ? "  # default" : "") << '\n';
    }
    out << "# c1 = " << format_number(scheme.constants.c1) << '\n';
    out << "# delta0 = " << format_number(scheme.constants.delta0) << '\n';
    out << "# delta = " << format_number(delta) << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const std::string& path, const std::string& out_dir, int snapshot_every, bool quiet,
                 std::ostream& out, std::ostream& err) {
  ValidatedConfig cfg = load(path);
  if (snapshot_every >= 0) cfg.numerical.snapshot_every = snapshot_every;
  const Outcome o = simulate_into(cfg, out_dir, err);
  const SimulationTrace& tr = o.audit.trace;
  if (!quiet) {
    out << "steps: " << tr.records.size() - 1 << ", delta = " << tr.delta << ", c1 = " << tr.constants.c1
        << ", delta0 = " << tr.constants.delta0 << '\n';
    if (tr.touchdown_step >= 0) out << "coincidence onset at step " << tr.touchdown_step << '\n';
    print_checks(out, o.audit.checks());
  }
  if (!tr.completed) {
    err << "run failed: " << tr.error << '\n';
    return kExitFailure;
  }
  return o.audit.passed() ? kExitOk : kExitFailure;
}

std::vector<CheckReport> oracle_checks(const ValidatedConfig& cfg, std::ostream& out, bool quiet) {
  std::vector<CheckReport> checks;
  const PhysicalParams& p = cfg.physical;
  const int n = cfg.numerical.n_x;

  // Flat plate with the configured constants and a constant sigma1.
  ValidatedConfig flat = cfg;
  flat.dielectric.profile = Sigma1Profile::constant;
  flat.dielectric.sigma_min.reset();
  flat.dielectric.sigma_max.reset();
  const Electrostatics es_flat = make_electrostatics(flat);
  for (double w : {0.0, -0.5 * p.H}) {
    const FlatPlateOracle o = flat_plate_oracle(flat, w);
    const BeamState s(BeamGrid{p.L, n}, std::vector<double>(n + 1, w));
    const auto ev = es_flat.evaluate(s);
    double psi_err = 0.0;
    double g_err = 0.0;
    for (int i = 1; i < n; ++i) {
      const double x = s.grid.x(i);
      for (int j = 0; j <= cfg.numerical.n_z_layer; ++j) {
        psi_err = std::max(psi_err, std::abs(ev.solution.layer(i, j) - o.psi1(x, ev.solution.mesh.layer_z(j))));
      }
      for (int k = 0; k <= cfg.numerical.n_eta_gap; ++k) {
        psi_err = std::max(psi_err, std::abs(ev.solution.gap(i, k) - o.psi2(x, ev.solution.mesh.gap_z(i, k))));
      }
      g_err = std::max(g_err, std::abs(ev.force.g[i] - o.force(x)));
    }
    std::ostringstream ctx;
    ctx << "w = " << w;
    checks.push_back(make_check("flat plate potential", psi_err, 1e-8, 0.0, ctx.str()));
    checks.push_back(make_check("flat plate force", g_err, 1e-8, 0.0, ctx.str()));
    const double scale = std::max(1.0, std::abs(o.energy));
    checks.push_back(make_check("flat plate energy", std::abs(ev.energy - o.energy) / scale, 1e-8, 0.0, ctx.str()));
  }
  const ConvergenceTable fp = flat_plate_study(flat, 3);
  checks.push_back(make_check("flat plate force on 3 levels", fp.max_error(), 1e-10, 0.0));

  const ManufacturedStudy mms = manufactured_study(p, 4);
  checks.push_back(make_check("manufactured L2 order", -mms.l2.min_order(), -1.9, 0.0, "reported as -order"));
  checks.push_back(make_check("manufactured flux order", -mms.flux.min_order(), -1.5, 0.0, "reported as -order"));

  const Electrostatics es = make_electrostatics(cfg);
  std::vector<DirectionalRow> rows;
  const auto grad = gradient_checks(es, &rows);
  checks.insert(checks.end(), grad.begin(), grad.end());

  // Quadrature against the assembled form on a deflected plate.
  const BeamState bent = clamped_bump(BeamGrid{p.L, n}, -0.3 * p.H);
  const auto ev = es.evaluate(bent);
  const double e_q = ev.energy;
  const double e_b = bilinear_energy(ev.solution);
  checks.push_back(make_check("energy quadrature vs assembled form", std::abs(e_q - e_b),
                              cfg.numerical.tol_as * std::max(1.0, std::abs(e_b)), 0.0));

  if (!quiet) {
    auto table = [&](const ConvergenceTable& t) {
      out << t.name << '\n';
      for (const auto& l : t.levels) {
        out << "  n_x " << std::setw(5) << l.n_x << "  n_z " << std::setw(4) << l.n_z << "  error "
            << std::setw(12) << std::setprecision(4) << l.error << "  order " << std::setprecision(3) << l.order
            << '\n';
      }
    };
    table(mms.l2);
    table(mms.flux);
    table(fp);
    out << "directional derivative (n_x = " << n << ", tolerance " << directional_tolerance(n) << ")\n";
    for (const auto& r : rows) {
      out << "  s " << std::setw(8) << r.s << "  quotient " << std::setprecision(10) << r.quotient << "  pairing "
          << r.pairing << "  rel " << std::setprecision(3) << r.rel_error << '\n';
    }
    out << std::setprecision(6);
  }
  return checks;
}

int cmd_oracle(const std::string& path, bool quiet, std::ostream& out) {
  const ValidatedConfig cfg = load(path);
  make_permittivity(cfg);  // surfaces inconsistent bounds as a configuration error
  const auto checks = oracle_checks(cfg, out, quiet);
  print_checks(out, checks);
  return all_passed(checks) ? kExitOk : kExitFailure;
}

int cmd_sweep(const std::string& path, const std::string& param, const std::vector<std::string>& values,
              const std::string& out_dir, bool quiet, std::ostream& out, std::ostream& err) {
  if (param != "V" && param != "delta" && param != "n_x") {
    err << "sweep: --param must be one of V, delta, n_x\n";
    return kExitConfig;
  }
  if (values.empty()) {
    err << "sweep: --values is empty\n";
    return kExitConfig;
  }
  const RawConfig base = read_config_file(path);
  std::vector<ValidatedConfig> cfgs;
  std::vector<std::string> problems;
  for (const auto& v : values) {
    RawConfig raw = base;
    raw[param] = v;
    try {
      cfgs.push_back(validate_config(raw));
    } catch (const ConfigError& e) {
      for (const auto& msg : e.violations()) problems.push_back(param + " = " + v + ": " + msg);
    }
  }
  if (!problems.empty()) throw ConfigError(problems);

  struct Row {
    std::string status;
    Outcome outcome;
    std::string error;
    std::ostringstream warnings;
  };
  std::vector<Row> rows(cfgs.size());
  std::vector<std::future<void>> jobs;
  for (std::size_t k = 0; k < cfgs.size(); ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      std::ostringstream dir;
      dir << "run_" << k;
      try {
        rows[k].outcome = simulate_into(cfgs[k], fs::path(out_dir) / dir.str(), rows[k].warnings);
        const auto& a = rows[k].outcome.audit;
        rows[k].status = !a.trace.completed ? "failed" : (a.passed() ? "ok" : "checks_failed");
        rows[k].error = a.trace.error;
      } catch (const std::exception& e) {
        rows[k].status = "failed";
        rows[k].error = e.what();
      }
    }));
  }
  for (auto& j : jobs) j.get();

  std::ostringstream csv;
  csv << "param,value,status,steps,final_t,E_total,min_gap,touchdown,touchdown_step,multiplier_mass,"
         "checks_passed,distance_to_previous,error\n";
  bool any_failed = false;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Row& r = rows[k];
    if (!r.warnings.str().empty()) err << '[' << param << " = " << values[k] << "] " << r.warnings.str();
    any_failed = any_failed || r.status != "ok";
    csv << param << ',' << values[k] << ',' << r.status << ',';
    const auto& tr = r.outcome.audit.trace;
    if (tr.records.empty()) {
      csv << ",,,,,,,,,";
    } else {
      const StepRecord& last = tr.records.back();
      csv << tr.records.size() - 1 << ',' << format_number(last.t) << ',' << format_number(last.energy.total) << ','
          << format_number(last.min_gap) << ',' << (tr.touchdown_step >= 0 ? 1 : 0) << ',' << tr.touchdown_step
          << ',' << format_number(last.multiplier_mass) << ',' << (r.outcome.audit.passed() ? 1 : 0) << ',';
      const auto& prev = k > 0 ? rows[k - 1].outcome.audit.trace : tr;
      if (k > 0 && !prev.states.empty() && prev.final_state().grid.n == tr.final_state().grid.n) {
        const BeamState& a = prev.final_state();
        const BeamState& b = tr.final_state();
        std::vector<double> diff(a.u.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.u[i] - b.u[i];
        csv << format_number(std::sqrt(trapezoid_squared(a.grid, diff)));
      }
      csv << ',';
    }
    std::string e = r.error;
    std::replace(e.begin(), e.end(), ',', ';');
    std::replace(e.begin(), e.end(), '\n', ' ');
    csv << e << '\n';
  }
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "sweep.csv", csv.str());
  if (!quiet) out << csv.str();
  return any_failed ? kExitFailure : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"memsflow: clamped-beam electrostatic actuation with contact, minimizing-movements scheme"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = "memsflow-out";
  int snapshot_every = -1;
  bool quiet = false;
  std::string param;
  std::vector<std::string> values;

  auto* sim = app.add_subcommand("simulate", "run the scheme and write trace, snapshots and manifest");
  sim->add_option("--config", config, "configuration file")->required();
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--snapshot-every", snapshot_every, "write a snapshot every N steps (0 disables)");
  sim->add_flag("--quiet", quiet, "no report on stdout");

  auto* orc = app.add_subcommand("oracle", "run the analytic and manufactured-solution checks");
  orc->add_option("--config", config, "configuration file")->required();
  orc->add_flag("--quiet", quiet, "only the check table");

  auto* swp = app.add_subcommand("sweep", "independent runs over one parameter");
  swp->add_option("--config", config, "configuration file")->required();
  swp->add_option("--param", param, "V, delta or n_x")->required();
  swp->add_option("--values", values, "comma-separated values")->delimiter(',');
  swp->add_option("--out", out_dir, "output directory");
  swp->add_flag("--quiet", quiet, "no table on stdout");

  auto* val = app.add_subcommand("validate", "check a configuration and echo it with defaults");
  val->add_option("--config", config, "configuration file")->required();
  val->add_flag("--quiet", quiet, "no echo");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(config, out_dir, snapshot_every, quiet, out, err);
    if (*orc) return cmd_oracle(config, quiet, out);
    if (*swp) return cmd_sweep(config, param, values, out_dir, quiet, out, err);
    if (*val) return cmd_validate(config, quiet, out, err);
  } catch (const ConfigError& e) {
    return report_config_error(err, e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitConfig;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace memsflow
