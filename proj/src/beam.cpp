#include "memsflow/beam.hpp"

#include <algorithm>
#include <cmath>

namespace memsflow {

BeamState::BeamState(BeamGrid g, std::vector<double> values) : grid(g), u(std::move(values)) {
  if (static_cast<int>(u.size()) != grid.nodes()) {
    throw Error("BeamState: expected " + std::to_string(grid.nodes()) + " nodal values, got " +
                std::to_string(u.size()));
  }
}

BeamState::BeamState(BeamGrid g) : grid(g), u(g.nodes(), 0.0) {}

bool BeamState::is_clamped() const { return u.front() == 0.0 && u.back() == 0.0; }

bool BeamState::is_admissible(double H) const {
  return std::all_of(u.begin(), u.end(), [H](double v) { return v >= -H; });
}

double BeamState::min() const { return *std::min_element(u.begin(), u.end()); }

double BeamState::max_abs() const {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

BeamState clamped_bump(const BeamGrid& grid, double amplitude) {
  BeamState s = sample(grid, [&](double x) {
    const double r = 1.0 - (x / grid.L) * (x / grid.L);
    return amplitude * r * r;
  });
  s.u.front() = 0.0;
  s.u.back() = 0.0;
  return s;
}

std::vector<double> second_difference(const BeamState& state) {
  const int n = state.grid.n;
  const double inv_h2 = 1.0 / (state.grid.h() * state.grid.h());
  const auto& u = state.u;
  std::vector<double> out(n + 1);
  // Ghost reflection at both ends.
  out[0] = (2.0 * u[1] - 2.0 * u[0]) * inv_h2;
  out[n] = (2.0 * u[n - 1] - 2.0 * u[n]) * inv_h2;
  for (int i = 1; i < n; ++i) out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_h2;
  return out;
}

std::vector<double> first_difference(const BeamState& state) {
  const int n = state.grid.n;
  const double inv_2h = 0.5 / state.grid.h();
  const auto& u = state.u;
  std::vector<double> out(n + 1, 0.0);
  for (int i = 1; i < n; ++i) out[i] = (u[i + 1] - u[i - 1]) * inv_2h;
  return out;
}

double trapezoid(const BeamGrid& grid, std::span<const double> values) {
  double sum = 0.0;
  for (int i = 0; i < grid.nodes(); ++i) sum += grid.weight(i) * values[i];
  return sum;
}

double trapezoid_squared(const BeamGrid& grid, std::span<const double> values) {
  double sum = 0.0;
  for (int i = 0; i < grid.nodes(); ++i) sum += grid.weight(i) * values[i] * values[i];
  return sum;
}

double H2Norms::h2() const { return std::sqrt(l2 * l2 + dx * dx + dxx * dxx); }

H2Norms h2_seminorms(const BeamState& state) {
  H2Norms norms;
  norms.l2 = std::sqrt(trapezoid_squared(state.grid, state.u));
  norms.dx = std::sqrt(trapezoid_squared(state.grid, first_difference(state)));
  norms.dxx = std::sqrt(trapezoid_squared(state.grid, second_difference(state)));
  return norms;
}

double mechanical_energy(const BeamState& state, const PhysicalParams& params) {
  const H2Norms n = h2_seminorms(state);
  const double slope2 = n.dx * n.dx;
  return 0.5 * params.beta * n.dxx * n.dxx + (0.5 * params.tau + 0.25 * params.a * slope2) * slope2;
}

BeamOperators beam_operators(const BeamGrid& grid) {
  const int n = grid.n;
  const int m = n - 1;
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  const double inv_2h = 0.5 / grid.h();
  // Interior unknown k corresponds to node k + 1.
  std::vector<Eigen::Triplet<double>> t2;
  std::vector<Eigen::Triplet<double>> t1;
  t2.emplace_back(0, 0, 2.0 * inv_h2);
  t2.emplace_back(n, m - 1, 2.0 * inv_h2);
  for (int i = 1; i < n; ++i) {
    const int k = i - 1;
    if (k - 1 >= 0) {
      t2.emplace_back(i, k - 1, inv_h2);
      t1.emplace_back(i, k - 1, -inv_2h);
    }
    t2.emplace_back(i, k, -2.0 * inv_h2);
    if (k + 1 < m) {
      t2.emplace_back(i, k + 1, inv_h2);
      t1.emplace_back(i, k + 1, inv_2h);
    }
  }
  BeamOperators ops;
  ops.d2.resize(n + 1, m);
  ops.d2.setFromTriplets(t2.begin(), t2.end());
  ops.dx.resize(n + 1, m);
  ops.dx.setFromTriplets(t1.begin(), t1.end());
  ops.weights.resize(n + 1);
  for (int i = 0; i <= n; ++i) ops.weights[i] = grid.weight(i);
  return ops;
}

Eigen::SparseMatrix<double> BeamOperators::bending() const {
  Eigen::SparseMatrix<double> m = d2.transpose() * weights.asDiagonal() * d2;
  return m;
}

Eigen::SparseMatrix<double> BeamOperators::stretching() const {
  Eigen::SparseMatrix<double> m = dx.transpose() * weights.asDiagonal() * dx;
  return m;
}

Eigen::VectorXd interior(const BeamState& state) {
  const int m = state.grid.n - 1;
  Eigen::VectorXd v(m);
  for (int k = 0; k < m; ++k) v[k] = state.u[k + 1];
  return v;
}

BeamState from_interior(const BeamGrid& grid, const Eigen::VectorXd& values) {
  BeamState s(grid);
  for (int k = 0; k < grid.n - 1; ++k) s.u[k + 1] = values[k];
  return s;
}

}  // namespace memsflow
