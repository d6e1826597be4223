#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <fstream>

#include "memsflow/minimizing_movements.hpp"
#include "support.hpp"

using namespace memsflow;

namespace {

ValidatedConfig coarse(RawConfig raw) {
  raw.emplace("n_x", "32");
  raw.emplace("n_z_layer", "8");
  raw.emplace("n_eta_gap", "8");
  return testing::config(raw);
}

// Dense clamped second difference, reflected ghosts, interior unknowns.
Eigen::MatrixXd dense_d2(int n, double h) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n + 1, n - 1);
  auto col = [](int node) { return node - 1; };
  for (int i = 0; i <= n; ++i) {
    auto add = [&](int node, double c) {
      if (node < 0) node = -node;
      if (node > n) node = 2 * n - node;
      if (node == 0 || node == n) return;
      D(i, col(node)) += c / (h * h);
    };
    add(i - 1, 1.0);
    add(i, -2.0);
    add(i + 1, 1.0);
  }
  return D;
}

}  // namespace

TEST_CASE("delta0 from c1") {
  CHECK(delta0_for(1.0) == 1.0 / 16);
  CHECK(delta0_for(1.0 / 32) == 1.0);
  CHECK(delta0_for(0.0) == 1.0);
  CHECK(delta0_for(2.0) == 1.0 / 32);

  PhysicalParams p;
  p.L = 1;
  p.d = 1;
  p.beta = 1;
  const MConstants m{0.0, 0.0, 0.5, 1.0};
  const SchemeConstants c = lower_bound_constant(p, 1.0, m);
  CHECK(c.K == 1.0);
  CHECK(c.c1 == 1.0);
  CHECK(c.delta0 == 1.0 / 16);
  p.beta = 32;
  CHECK(lower_bound_constant(p, 1.0, m).delta0 == 1.0);
  p.beta = 0;
  CHECK_THROWS_AS(lower_bound_constant(p, 1.0, m), Error);
}

TEST_CASE("c1 for the unit device") {
  const auto cfg = testing::config({{"sigma1", "1"}, {"sigma2", "1"}, {"V", "1"}, {"L", "1"}, {"H", "1"},
                                    {"d", "1"}, {"beta", "2"}, {"w_max", "1"}});
  const Scheme s = make_scheme(cfg);
  const MConstants m = s.constants.m;
  // Young: K |u| |u''| <= (beta/4)|u''|^2 + (1/beta) K^2 |u|^2.
  const double smax = 1.0;
  const double K = 2.0 * smax * m.m3;
  const double young = K * K / (4 * (2.0 / 4));
  const double A = 3.0 * 1.0 * m.m1 * 2.0 * smax;
  const double B = 1.5 * m.m2 * 2.0 * smax;
  const double c1 = std::max(A + young, B + young);
  CHECK(std::abs(s.constants.c1 - c1) <= 1e-12 * c1);
  CHECK(s.constants.delta0 == std::min(1.0, 1.0 / (16 * c1)));
}

TEST_CASE("without voltage one step is an implicit Euler step of the biharmonic flow") {
  const auto cfg = coarse({{"V", "0"}, {"beta", "1.7"}});
  const Scheme scheme = make_scheme(cfg);
  const BeamState un = clamped_bump(BeamGrid{1.0, 32}, 0.05);
  const double delta = 0.01;
  const StepResult r = scheme.step(un, delta);

  const int n = 32;
  const double h = un.grid.h();
  const Eigen::MatrixXd D = dense_d2(n, h);
  Eigen::VectorXd w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = (i == 0 || i == n) ? h / 2 : h;
  const Eigen::MatrixXd Wi = w.segment(1, n - 1).asDiagonal();
  const Eigen::MatrixXd A = Wi / delta + 1.7 * D.transpose() * w.asDiagonal() * D;
  Eigen::VectorXd b(n - 1);
  for (int i = 1; i < n; ++i) b[i - 1] = w[i] * un.u[i] / delta;
  const Eigen::VectorXd v = A.partialPivLu().solve(b);
  for (int i = 1; i < n; ++i) CHECK(std::abs(r.state.u[i] - v[i - 1]) <= 1e-12);
  for (double z : r.multiplier) CHECK(z == 0.0);
  CHECK(r.dissipation > 0.0);
  CHECK(r.energy.total < scheme.energy(un).total);
}

TEST_CASE("the flat state is stationary without voltage") {
  const auto cfg = coarse({{"V", "0"}});
  const Scheme scheme = make_scheme(cfg);
  const StepResult r = scheme.step(BeamState(BeamGrid{1.0, 32}), 0.1);
  for (double u : r.state.u) CHECK(u == 0.0);
  for (double z : r.multiplier) CHECK(z == 0.0);
  CHECK(r.dissipation == 0.0);
}

TEST_CASE("touchdown step satisfies the contact conditions") {
  const auto cfg = coarse({{"V", "10"}});
  const Scheme scheme = make_scheme(cfg);
  const double H = cfg.physical.H;
  BeamState u = clamped_bump(BeamGrid{1.0, 32}, -0.9);
  bool touched = false;
  for (int n = 0; n < 40 && !touched; ++n) {
    const StepResult r = scheme.step(u, 1e-3);
    REQUIRE(r.state.is_admissible(H));
    REQUIRE(r.state.is_clamped());
    for (std::size_t i = 0; i < r.multiplier.size(); ++i) {
      CHECK(-r.multiplier[i] >= -cfg.numerical.tol_as);
      CHECK(std::abs(r.multiplier[i] * (r.state.u[i] + H)) <= cfg.numerical.tol_as);
      if (r.active[i]) CHECK(r.state.u[i] == -H);
    }
    CHECK(r.complementarity <= cfg.numerical.tol_as);
    CHECK(r.decrease_ok);
    touched = r.multiplier_mass > 0.0;
    u = r.state;
  }
  CHECK(touched);
}

TEST_CASE("initial states") {
  auto cfg = coarse({{"u0_profile", "bump"}, {"u0_amplitude", "0.2"}});
  BeamState u0 = initial_state(cfg);
  CHECK(u0.u[16] == doctest::Approx(0.2));
  CHECK(u0.is_clamped());

  const auto dir = testing::scratch_dir("table");
  {
    std::ofstream f(dir / "u0.txt");
    f << "# x u\n-1 0\n0 -0.5\n1 0\n";
  }
  cfg = coarse({{"u0_profile", "table"}, {"u0_table", (dir / "u0.txt").string()}});
  u0 = initial_state(cfg);
  CHECK(u0.u[16] == doctest::Approx(-0.5));
  CHECK(u0.u[8] == doctest::Approx(-0.25));
  {
    std::ofstream f(dir / "bad.txt");
    f << "-1 0.1\n1 0\n";
  }
  cfg = coarse({{"u0_profile", "table"}, {"u0_table", (dir / "bad.txt").string()}});
  CHECK_THROWS_AS(initial_state(cfg), ConfigError);
  cfg = coarse({{"u0_profile", "table"}, {"u0_table", (dir / "missing.txt").string()}});
  CHECK_THROWS_AS(initial_state(cfg), ConfigError);
}

TEST_CASE("run bookkeeping") {
  const auto cfg = coarse({{"V", "0"}, {"u0_profile", "bump"}, {"u0_amplitude", "0.1"}});
  const Scheme scheme = make_scheme(cfg);
  const SimulationTrace tr = run(scheme, initial_state(cfg), 0.1, 1.0);
  CHECK(tr.completed);
  CHECK(tr.records.size() == 11);
  CHECK(tr.times.back() == doctest::Approx(1.0));
  CHECK(tr.touchdown_step == -1);
  CHECK_FALSE(tr.delta_exceeds_delta0);
  for (std::size_t n = 1; n < tr.records.size(); ++n) {
    CHECK(tr.records[n].energy.total < tr.records[n - 1].energy.total);
    CHECK(tr.records[n].dissipation_cum ==
          doctest::Approx(tr.records[n - 1].dissipation_cum + tr.records[n].dissipation));
  }
  CHECK(tr.final_state().max_abs() < 0.1);
}

TEST_CASE("a failing step ends the run with a partial trace") {
  const auto cfg = coarse({{"V", "10"}, {"max_fp", "1"}});
  const Scheme scheme = make_scheme(cfg);
  const SimulationTrace tr = run(scheme, BeamState(BeamGrid{1.0, 32}), 1e-3, 0.1);
  CHECK_FALSE(tr.completed);
  CHECK_FALSE(tr.error.empty());
  CHECK(tr.records.size() >= 1);
  CHECK(tr.records.size() < 101);
}
