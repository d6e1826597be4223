#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "memsflow/electrostatics.hpp"
#include "support.hpp"

using namespace memsflow;

namespace {

ValidatedConfig mesh_config(RawConfig raw) {
  raw.emplace("n_x", "32");
  raw.emplace("n_z_layer", "8");
  raw.emplace("n_eta_gap", "8");
  return testing::config(raw);
}

BeamState flat(int n, double w) { return BeamState(BeamGrid{1.0, n}, std::vector<double>(n + 1, w)); }

}  // namespace

TEST_CASE("two-layer flat plate: force and energy") {
  const auto es = make_electrostatics(mesh_config({{"sigma1", "1"}, {"sigma2", "2"}, {"d", "1"}, {"H", "1"}, {"V", "2"}}));
  const auto ev = es.evaluate(flat(32, 0.0));
  for (int i = 1; i < 32; ++i) {
    CHECK(ev.force.g[i] == doctest::Approx(4.0 / 9).epsilon(1e-12));
    CHECK(ev.force.branch[i] == Column::free);
  }
  CHECK(ev.energy == doctest::Approx(-8.0 / 3).epsilon(1e-12));

  // g = s2 V^2 s1^2 / (2 (s2 d + s1 (H + w))^2), E = -2L V^2 s1 s2 / (2(s2 d + s1(H+w))).
  for (double w : {-0.5, 0.3, 2.0}) {
    const auto e = es.evaluate(flat(32, w));
    const double den = 2.0 + (1.0 + w);
    CHECK(e.force.g[16] == doctest::Approx(2.0 * 4.0 / (2 * den * den)).epsilon(1e-11));
    CHECK(e.energy == doctest::Approx(-4.0 * 2.0 / den).epsilon(1e-11));
  }
}

TEST_CASE("single material flat plate force") {
  const auto es = make_electrostatics(mesh_config({{"sigma1", "1"}, {"sigma2", "1"}, {"V", "1"}}));
  const auto ev = es.evaluate(flat(32, 0.0));
  for (int i = 1; i < 32; ++i) CHECK(ev.force.g[i] == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("force decays as the plate moves away") {
  const auto es = make_electrostatics(mesh_config({{"sigma1", "1.3"}, {"sigma2", "0.9"}, {"V", "1"}}));
  double prev = 1e300;
  for (double w : {-0.9, -0.5, 0.0, 1.0, 4.0, 16.0}) {
    const double g = es.evaluate(flat(32, w)).force.g[16];
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("quadratic in V") {
  auto cfg = mesh_config({{"sigma1_profile", "bump"}, {"sigma1", "1"}, {"sigma1_amplitude", "0.4"}, {"V", "1.5"}});
  const BeamState s = clamped_bump(BeamGrid{1.0, 32}, -0.4);
  const double e1 = make_electrostatics(cfg).energy(s);
  cfg.physical.V = 3.0;
  const double e2 = make_electrostatics(cfg).energy(s);
  CHECK(e2 == doctest::Approx(4 * e1).epsilon(1e-12));
  cfg.physical.V = 0.0;
  const auto ev = make_electrostatics(cfg).evaluate(s);
  CHECK(ev.energy == 0.0);
  for (double g : ev.force.g) CHECK(g == 0.0);
}

TEST_CASE("force is non-negative on random admissible states") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto cfg = mesh_config({{"sigma1_profile", "affine"}, {"sigma1", "1"}, {"sigma1_slope", "0.5"}, {"V", "2"}});
  const auto es = make_electrostatics(cfg);
  for (int t = 0; t < 15; ++t) {
    const double a = 1.5 * u(rng), b = 0.5 * u(rng);
    const BeamState s = sample(BeamGrid{1.0, 32}, [&](double x) {
      return std::max(-1.0, (a + b * x) * (1 - x * x) * (1 - x * x));
    });
    const auto ev = es.evaluate(s, ForceModel::trace);
    for (double g : ev.force.g) CHECK(g >= 0.0);
  }
}

TEST_CASE("gradient force dips below zero only at the discretization level") {
  // Raised dome: the field under the apex is weak and the discrete energy
  // gradient can undershoot zero there.
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const auto cfg = testing::config({{"V", "2"}, {"n_x", std::to_string(n)}, {"n_z_layer", std::to_string(n / 4)},
                                      {"n_eta_gap", std::to_string(n / 4)}});
    const BeamState s = clamped_bump(BeamGrid{1.0, n}, 1.271);
    const auto ev = make_electrostatics(cfg).evaluate(s, ForceModel::gradient);
    const double undershoot = -std::min(0.0, *std::min_element(ev.force.g.begin(), ev.force.g.end()));
    MESSAGE("n_x = " << n << ": undershoot " << undershoot);
    if (prev > 0.0) CHECK(undershoot <= prev / 3.0);
    prev = undershoot;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("wide touching block uses the layer formula") {
  const auto cfg = testing::config({{"n_x", "64"}, {"n_z_layer", "16"}, {"n_eta_gap", "8"}, {"d", "0.2"},
                                    {"sigma1", "1.2"}, {"sigma2", "0.8"}, {"V", "1"}});
  const BeamState s = sample(BeamGrid{1.0, 64}, [](double x) { return std::max(-1.0, -3 * (1 - x * x) * (1 - x * x)); });
  const auto ev = make_electrostatics(cfg).evaluate(s);
  REQUIRE(ev.force.branch[32] == Column::touching);
  const double expect = 1.2 * 1.2 / (2 * 0.8 * 0.2 * 0.2);
  CHECK(ev.force.g[32] == doctest::Approx(expect).epsilon(1e-3));
  // Branch follows the mesh flag at the block edges.
  for (int i = 0; i <= 64; ++i) CHECK((ev.force.branch[i] == Column::touching) == ev.solution.mesh.touching(i));
}

TEST_CASE("gradient force has no jump when a node lands") {
  const auto cfg = mesh_config({{"n_x", "16"}, {"n_z_layer", "4"}, {"n_eta_gap", "4"}, {"V", "10"}});
  const auto es = make_electrostatics(cfg);
  const double eps = cfg.numerical.eps_gap;
  // Apex just above and just below the threshold, rest of the profile unchanged.
  BeamState above = clamped_bump(BeamGrid{1.0, 16}, -0.9);
  BeamState below = above;
  above.u[8] = -1.0 + eps * (1 + 1e-6);
  below.u[8] = -1.0 + eps * (1 - 1e-6);
  const auto ea = es.evaluate(above, ForceModel::gradient);
  const auto eb = es.evaluate(below, ForceModel::gradient);
  REQUIRE(ea.force.branch[8] == Column::free);
  REQUIRE(eb.force.branch[8] == Column::touching);
  for (int i = 1; i < 16; ++i) {
    CAPTURE(i);
    CHECK(eb.force.g[i] == doctest::Approx(ea.force.g[i]).epsilon(1e-4));
  }
  // The trace force of an isolated free column blows up like 1/gap^2 on this
  // mesh, so the trace model does jump here.
  const auto ta = es.evaluate(above, ForceModel::trace);
  const auto tb = es.evaluate(below, ForceModel::trace);
  CHECK(ta.force.g[8] > 1e3 * tb.force.g[8]);
}

TEST_CASE("gradient force inside a touching block matches the layer formula") {
  const auto cfg = testing::config({{"n_x", "64"}, {"n_z_layer", "16"}, {"n_eta_gap", "8"}, {"d", "0.2"},
                                    {"sigma1", "1.2"}, {"sigma2", "0.8"}, {"V", "1"}});
  const BeamState s = sample(BeamGrid{1.0, 64}, [](double x) { return std::max(-1.0, -3 * (1 - x * x) * (1 - x * x)); });
  const auto ev = make_electrostatics(cfg).evaluate(s, ForceModel::gradient);
  REQUIRE(ev.solution.mesh.touching(32));
  const double expect = 1.2 * 1.2 / (2 * 0.8 * 0.2 * 0.2);
  CHECK(ev.force.g[32] == doctest::Approx(expect).epsilon(1e-3));
}

TEST_CASE("trace and gradient forces agree on a smooth state") {
  const auto cfg = testing::config({{"n_x", "64"}, {"n_z_layer", "16"}, {"n_eta_gap", "16"}, {"V", "1"}});
  const auto es = make_electrostatics(cfg);
  const BeamState s = clamped_bump(BeamGrid{1.0, 64}, -0.3);
  const auto a = es.evaluate(s, ForceModel::trace).force.g;
  const auto b = es.evaluate(s, ForceModel::gradient).force.g;
  double diff = 0.0, size = 0.0;
  for (int i = 4; i <= 60; ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    size = std::max(size, std::abs(a[i]));
  }
  CHECK(diff <= 1e-2 * size);
}

TEST_CASE("directional derivative") {
  const auto cfg = testing::config({{"n_x", "64"}, {"n_z_layer", "16"}, {"n_eta_gap", "16"}, {"V", "1"}});
  const auto es = make_electrostatics(cfg);
  const BeamState u(BeamGrid{1.0, 64});

  const auto zero = directional_derivative_check(es, u, u, {1e-3});
  CHECK(zero[0].quotient == 0.0);
  CHECK(zero[0].pairing == 0.0);

  const BeamState w = standard_direction(u, 1.0);
  CHECK(w.min() == doctest::Approx(-1.0 / 40).epsilon(1e-14));
  const auto rows = directional_derivative_check(es, u, w, {1e-2, 1e-3, 1e-4});
  CHECK(rows[1].rel_error <= 1e-2);
  CHECK(rows[1].rel_error < rows[0].rel_error);
  CHECK(rows[2].rel_error < rows[1].rel_error);
  CHECK(rows[0].pairing < 0.0);

  CHECK(directional_tolerance(64) == 1e-2);
  CHECK(directional_tolerance(200) == 1e-2);
  CHECK(directional_tolerance(8) == doctest::Approx(0.64));

  BeamState far = u;
  for (double& v : far.u) v = -3.0;
  far.u.front() = far.u.back() = 0.0;
  CHECK_THROWS_AS(directional_derivative_check(es, u, far, {1.0}), Error);
}
