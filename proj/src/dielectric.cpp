#include "memsflow/dielectric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace memsflow {

namespace {

double lerp(double a, double b, int k, int n) { return n == 0 ? a : a + (b - a) * k / n; }

}  // namespace

void certify_bounds(PermittivityModel& perm, const PhysicalParams& p, int samples) {
  double lo = perm.sigma2;
  double hi = perm.sigma2;
  for (int i = 0; i < samples; ++i) {
    const double x = lerp(-p.L, p.L, i, samples - 1);
    for (int j = 0; j < samples; ++j) {
      const double z = lerp(-p.H - p.d, -p.H, j, samples - 1);
      const double s = perm.sigma1(x, z);
      if (!(s > 0.0) || !std::isfinite(s)) {
        std::ostringstream os;
        os << "sigma1 must be positive and finite, got " << s << " at (" << x << ", " << z << ")";
        throw ConfigError(os.str());
      }
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  perm.sigma_min = lo;
  perm.sigma_max = hi;
}

PermittivityModel make_permittivity(const ValidatedConfig& config, int samples) {
  const auto& e = config.dielectric;
  const double L = config.physical.L;
  PermittivityModel perm;
  perm.sigma2 = e.sigma2;
  perm.z_independent = true;
  switch (e.profile) {
    case Sigma1Profile::constant: {
      const double s = e.sigma1;
      perm.sigma1 = [s](double, double) { return s; };
      perm.sigma1_dx = [](double) { return 0.0; };
      break;
    }
    case Sigma1Profile::affine: {
      const double s = e.sigma1;
      const double k = e.sigma1_slope / L;
      perm.sigma1 = [s, k](double x, double) { return s + k * x; };
      perm.sigma1_dx = [k](double) { return k; };
      break;
    }
    case Sigma1Profile::bump: {
      const double s = e.sigma1;
      const double amp = e.sigma1_amplitude;
      const double w = std::numbers::pi / L;
      perm.sigma1 = [s, amp, w](double x, double) { return s + 0.5 * amp * (1.0 + std::cos(w * x)); };
      perm.sigma1_dx = [amp, w](double x) { return -0.5 * amp * w * std::sin(w * x); };
      break;
    }
  }
  certify_bounds(perm, config.physical, samples);
  if (e.sigma_min) {
    if (*e.sigma_min > perm.sigma_min) {
      throw ConfigError("sigma_min exceeds the sampled minimum permittivity");
    }
    perm.sigma_min = *e.sigma_min;
  }
  if (e.sigma_max) {
    if (*e.sigma_max < perm.sigma_max) {
      throw ConfigError("sigma_max is below the sampled maximum permittivity");
    }
    perm.sigma_max = *e.sigma_max;
  }
  return perm;
}

BoundaryDataModel capacitor_boundary_data(const PermittivityModel& perm, const PhysicalParams& p) {
  if (!perm.z_independent) throw Error("closed-form capacitor boundary data requires z-independent sigma1");
  BoundaryDataModel model;
  model.V = p.V;
  model.L = p.L;
  model.H = p.H;
  model.d = p.d;
  const double V = p.V;
  const double H = p.H;
  const double d = p.d;
  const double s2 = perm.sigma2;
  auto s1 = perm.sigma1;
  auto s1x = perm.sigma1_dx;
  const double z_ref = -H;  // sigma1 is z-independent; any layer height will do

  model.h1 = [=](double x, double z, double w) {
    const double s = s1(x, z_ref);
    const double ds = s1x(x);
    const double den = s2 * d + s * (H + w);
    const double num = V * s2 * (H + z + d);
    HSample out;
    out.value = num / den;
    out.dx = -num * ds * (H + w) / (den * den);
    out.dz = V * s2 / den;
    out.dw = -num * s / (den * den);
    return out;
  };
  model.h2 = [=](double x, double z, double w) {
    const double s = s1(x, z_ref);
    const double ds = s1x(x);
    const double den = s2 * d + s * (H + w);
    const double top = s2 * d + s * (H + z);
    HSample out;
    out.value = V * top / den;
    out.dx = V * ds * s2 * d * (z - w) / (den * den);
    out.dz = V * s / den;
    out.dw = -V * top * s / (den * den);
    return out;
  };
  return model;
}

double CompatReport::worst() const { return std::max({continuity, flux, bottom, plate}); }

CompatReport check_transmission_compat(const BoundaryDataModel& model,
                                       const PermittivityModel& perm, int samples,
                                       double w_max) {
  CompatReport r;
  const int n = std::max(samples, 2);
  const double zi = -model.H;
  for (int i = 0; i < n; ++i) {
    const double x = lerp(-model.L, model.L, i, n - 1);
    for (int k = 0; k < n; ++k) {
      const double w = lerp(-model.H, w_max, k, n - 1);
      const HSample a = model.h1(x, zi, w);
      const HSample b = model.h2(x, zi, w);
      r.continuity = std::max(r.continuity, std::abs(a.value - b.value));
      r.flux = std::max(r.flux, std::abs(perm.sigma1(x, zi) * a.dz - perm.sigma2 * b.dz));
      r.bottom = std::max(r.bottom, std::abs(model.h1(x, -model.H - model.d, w).value));
      r.plate = std::max(r.plate, std::abs(model.h2(x, w, w).value - model.V));
    }
  }
  return r;
}

MConstants estimate_m_constants(const BoundaryDataModel& model, double w_max,
                                MSampling sampling) {
  if (!(w_max >= -model.H)) throw Error("estimate_m_constants: w_max must be >= -H");
  const double H = model.H;
  // Fixed spacing anchored at -H, rounded up past w_max: sample sets are
  // nested in w_max, so the estimate is monotone in the range.
  const double dw = H / std::max(sampling.nw, 1);
  const int nw = 1 + static_cast<int>(std::ceil((w_max + H) / dw - 1e-12));
  const int nx = std::max(sampling.nx, 2);
  const int nz = std::max(sampling.nz, 2);

  double m1 = 0.0;
  double m3 = 0.0;
  auto check = [](const HSample& s, double x, double z, double w) {
    if (!std::isfinite(s.dx) || !std::isfinite(s.dz) || !std::isfinite(s.dw)) {
      std::ostringstream os;
      os << "non-finite boundary-data derivative at (" << x << ", " << z << ", " << w << ")";
      throw Error(os.str());
    }
  };
  for (int k = 0; k < nw; ++k) {
    const double w = -H + k * dw;
    const double gap = H + w;
    for (int i = 0; i < nx; ++i) {
      const double x = lerp(-model.L, model.L, i, nx - 1);
      for (int j = 0; j < nz; ++j) {
        const double z1 = lerp(-H - model.d, -H, j, nz - 1);
        const HSample a = model.h1(x, z1, w);
        check(a, x, z1, w);
        const double s1 = std::abs(a.dx) + std::abs(a.dz);
        m1 = std::max(m1, s1 * s1);
        m3 = std::max(m3, a.dw * a.dw);

        const double z2 = lerp(-H, w, j, nz - 1);
        const HSample b = model.h2(x, z2, w);
        check(b, x, z2, w);
        const double s2 = std::abs(b.dx) + std::abs(b.dz);
        m1 = std::max(m1, gap * s2 * s2);
        m3 = std::max(m3, gap * b.dw * b.dw);
      }
    }
  }
  constexpr double inflation = 1.05;
  return MConstants{inflation * m1, 0.0, inflation * m3, w_max};
}

}  // namespace memsflow
