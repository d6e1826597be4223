#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "memsflow/diagnostics.hpp"
#include "support.hpp"

using namespace memsflow;

namespace {

ValidatedConfig coarse(RawConfig raw) {
  raw.emplace("n_x", "32");
  raw.emplace("n_z_layer", "8");
  raw.emplace("n_eta_gap", "8");
  return testing::config(raw);
}

const CheckReport& named(const std::vector<CheckReport>& v, const std::string& name) {
  for (const auto& c : v) {
    if (c.name == name) return c;
  }
  FAIL("missing check " << name);
  return v.front();
}

}  // namespace

TEST_CASE("check reports") {
  CHECK(make_check("a", 1.0, 1.0, 0.0).passed);
  CHECK(make_check("a", 1.5, 1.0, 0.5).passed);
  CHECK_FALSE(make_check("a", 1.6, 1.0, 0.5).passed);
  CHECK_FALSE(make_check("a", std::nan(""), 1.0, 0.0).passed);
  CHECK(make_check("a", 1e300, std::numeric_limits<double>::infinity(), 0.0).passed);
  CHECK_FALSE(all_passed({make_check("a", 0, 1, 0), make_check("b", 2, 1, 0)}));

  const auto w = worst_of({{make_check("x", 1, 2, 0)}, {make_check("x", 3, 2, 0)}, {make_check("x", 1.5, 2, 0)}});
  REQUIRE(w.size() == 1);
  CHECK_FALSE(w[0].passed);
  CHECK(w[0].measured == 3);
}

TEST_CASE("flat-plate oracle") {
  const auto cfg = coarse({{"sigma1", "1"}, {"sigma2", "2"}, {"V", "2"}});
  const FlatPlateOracle o = flat_plate_oracle(cfg, 0.0);
  CHECK(o.force(0.3) == doctest::Approx(4.0 / 9).epsilon(1e-15));
  CHECK(o.plate_trace(0.0) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(o.energy == doctest::Approx(-8.0 / 3).epsilon(1e-12));
  CHECK(o.psi1(0.0, -2.0) == doctest::Approx(0.0));
  CHECK(o.psi2(0.0, 0.0) == doctest::Approx(2.0));
  CHECK(o.psi1(0.0, -1.0) == doctest::Approx(4.0 / 3));
  CHECK_THROWS_AS(flat_plate_oracle(cfg, -1.0), Error);

  // Single-material limit: V^2 s / (2 (H + w + d)^2).
  const auto one = coarse({{"sigma1", "1.4"}, {"sigma2", "1.4"}, {"V", "1.5"}});
  CHECK(flat_plate_oracle(one, 0.5).force(0.0) == doctest::Approx(1.5 * 1.5 * 1.4 / (2 * 2.5 * 2.5)).epsilon(1e-14));
}

TEST_CASE("flat-plate force is exact on every level") {
  const auto cfg = coarse({{"sigma1", "1"}, {"sigma2", "2"}, {"V", "2"}});
  const ConvergenceTable t = flat_plate_study(cfg, 3);
  REQUIRE(t.levels.size() == 3);
  CHECK(t.max_error() <= 1e-10);
}

TEST_CASE("manufactured transmission solution converges at second order") {
  const auto cfg = coarse({});
  const ManufacturedStudy m = manufactured_study(cfg.physical, 4);
  REQUIRE(m.l2.levels.size() == 4);
  CHECK(m.l2.min_order() >= 1.9);
  CHECK(m.flux.min_order() >= 1.5);
  for (std::size_t k = 1; k < m.flux.levels.size(); ++k) CHECK(m.flux.levels[k].error < m.flux.levels[k - 1].error);
}

TEST_CASE("steady deflection converges under mesh refinement") {
  const auto cfg = coarse({{"V", "0.05"}});
  const ConvergenceTable t = steady_study(cfg, 3, 16);
  for (std::size_t k = 1; k < t.levels.size(); ++k) MESSAGE("order " << t.levels[k].order);
  CHECK(t.min_order() >= 1.5);
}

TEST_CASE("steady state and residual") {
  const auto cfg = coarse({{"V", "0.05"}});
  const Scheme scheme = make_scheme(cfg);
  const SteadyState ss = steady_state(scheme);
  CHECK(steady_residual(scheme, ss.state) <= 1e-10);
  CHECK(ss.state.min() < 0.0);
  CHECK(steady_residual(scheme, BeamState(BeamGrid{1.0, 32})) > 3e-4);  // g(0) = V^2 / 8
}

TEST_CASE("localization radius") {
  CHECK(localization_radius(1.0, 1.0, 4.0) == doctest::Approx(0.75));
  CHECK(localization_radius(1.0, 1.0, 0.5) == 0.5);
  CHECK(localization_radius(2.0, 1.0, 0.0) == 1.0);
}

TEST_CASE("energy ledger catches a corrupted energy at exactly that index") {
  const auto cfg = coarse({{"V", "0"}, {"u0_profile", "bump"}, {"u0_amplitude", "0.1"}});
  const Scheme scheme = make_scheme(cfg);
  SimulationTrace tr = run(scheme, initial_state(cfg), 0.05, 1.0);
  const LedgerReport clean = check_energy_ledger(tr, cfg.physical, cfg.numerical.tol_fp);
  CHECK(clean.passed());
  CHECK(clean.decrease_failures.empty());

  tr.records[7].energy.total -= 1e-3;
  const LedgerReport bad = check_energy_ledger(tr, cfg.physical, cfg.numerical.tol_fp);
  CHECK_FALSE(named(bad.checks, "per-step decrease").passed);
  REQUIRE(bad.decrease_failures.size() == 1);
  CHECK(bad.decrease_failures[0] == 7);

  // Side-effect free and deterministic.
  const LedgerReport again = check_energy_ledger(tr, cfg.physical, cfg.numerical.tol_fp);
  CHECK(again.decrease_failures == bad.decrease_failures);
  CHECK(again.checks.size() == bad.checks.size());
  for (std::size_t k = 0; k < bad.checks.size(); ++k) CHECK(again.checks[k].measured == bad.checks[k].measured);
}

TEST_CASE("multiplier checks") {
  const auto cfg = coarse({{"V", "10"}});
  const Scheme scheme = make_scheme(cfg);

  SUBCASE("no contact") {
    const StepResult r = scheme.step(BeamState(BeamGrid{1.0, 32}), 1e-4);
    for (const auto& c : check_multiplier(r, cfg, 1.0)) CHECK(c.passed);
  }

  SUBCASE("touchdown and an injected sign flip") {
    BeamState u = clamped_bump(BeamGrid{1.0, 32}, -0.95);
    StepResult r;
    for (int n = 0; n < 40; ++n) {
      r = scheme.step(u, 1e-3);
      u = r.state;
      if (r.multiplier_mass > 0.0) break;
    }
    REQUIRE(r.multiplier_mass > 0.0);
    const double K = h2_seminorms(r.state).h2();
    const auto ok = check_multiplier(r, cfg, K);
    for (const auto& c : ok) CHECK(c.passed);
    const double xT = localization_radius(1.0, 1.0, K);
    for (int i = 0; i <= 32; ++i) {
      if (r.multiplier[i] != 0.0) CHECK(std::abs(r.state.grid.x(i)) < xT);
    }

    StepResult flipped = r;
    for (double& z : flipped.multiplier) z = -z;
    CHECK_FALSE(named(check_multiplier(flipped, cfg, K), "multiplier sign").passed);

    StepResult stray = r;
    stray.multiplier[3] = -1.0;
    CHECK_FALSE(named(check_multiplier(stray, cfg, K), "support in coincidence set").passed);
  }
}

TEST_CASE("audited decay run passes every check") {
  const auto cfg = coarse({{"V", "0"}, {"u0_profile", "bump"}, {"u0_amplitude", "0.1"}});
  const Scheme scheme = make_scheme(cfg);
  const RunAudit a = audit_run(scheme, initial_state(cfg), 1.0, 20.0);
  for (const auto& c : a.checks()) {
    CAPTURE(c.name);
    CHECK(c.passed);
  }
  CHECK(a.trace.final_state().max_abs() < 1e-6);
}

TEST_CASE("gradient checks report the schedule tolerance on a coarse mesh") {
  const auto cfg = testing::config({{"n_x", "8"}, {"n_z_layer", "4"}, {"n_eta_gap", "4"}});
  std::vector<DirectionalRow> rows;
  const auto checks = gradient_checks(make_electrostatics(cfg), &rows);
  CHECK(rows.size() == 3);
  CHECK(named(checks, "directional derivative at s = 1e-3").bound == doctest::Approx(0.64));
}

TEST_CASE("force stability under small perturbations") {
  const auto cfg = coarse({{"V", "1"}});
  const StabilityReport s = force_stability(make_scheme(cfg), 20, 1e-3);
  CHECK(s.samples == 20);
  CHECK(std::isfinite(s.max_ratio));
  MESSAGE("stability constant " << s.max_ratio);
  const StabilityReport again = force_stability(make_scheme(cfg), 20, 1e-3);
  CHECK(again.max_ratio == s.max_ratio);
}
