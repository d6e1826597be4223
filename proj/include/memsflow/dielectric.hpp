#pragma once

// Permittivity of the layer/gap pair and the boundary-data family h = (h1, h2)
// that fixes the Dirichlet values of the potential as a function of the local
// deflection w.

#include <functional>

#include "memsflow/config.hpp"

namespace memsflow {

struct PermittivityModel {
  /// sigma1 on the closed layer [-L, L] x [-H-d, -H].
  std::function<double(double x, double z)> sigma1;
  /// d sigma1 / dx; only meaningful when z_independent.
  std::function<double(double x)> sigma1_dx;
  double sigma2 = 1.0;
  bool z_independent = true;
  double sigma_min = 1.0;
  double sigma_max = 1.0;
};

/// Builds sigma1 from the configured profile family and certifies the bounds
/// on a sampling grid. Configured sigma_min/sigma_max must bracket the samples,
/// otherwise ConfigError.
PermittivityModel make_permittivity(const ValidatedConfig& config, int samples = 129);

/// Sets sigma_min/sigma_max to the sampled extremes of sigma1 and sigma2.
void certify_bounds(PermittivityModel& perm, const PhysicalParams& params, int samples = 129);

/// Value and partial derivatives of h1 or h2 at (x, z, w).
struct HSample {
  double value = 0.0;
  double dx = 0.0;
  double dz = 0.0;
  double dw = 0.0;
};

struct BoundaryDataModel {
  std::function<HSample(double x, double z, double w)> h1;  // layer
  std::function<HSample(double x, double z, double w)> h2;  // gap
  double V = 0.0;
  double L = 1.0;
  double H = 1.0;
  double d = 1.0;
};

/// Closed-form boundary data for a z-independent sigma1(x):
///   h1 = V sigma2 (H+z+d) / (sigma2 d + sigma1(x)(H+w))
///   h2 = V (sigma2 d + sigma1(x)(H+z)) / (sigma2 d + sigma1(x)(H+w))
/// Throws Error if sigma1 depends on z.
BoundaryDataModel capacitor_boundary_data(const PermittivityModel& perm, const PhysicalParams& params);

struct CompatReport {
  double continuity = 0.0;  // max |h1(x,-H,w) - h2(x,-H,w)|
  double flux = 0.0;        // max |sigma1 dz h1 - sigma2 dz h2| at z = -H
  double bottom = 0.0;      // max |h1(x,-H-d,w)|
  double plate = 0.0;       // max |h2(x,w,w) - V|

  double worst() const;
};

/// Samples (x, w) over [-L, L] x [-H, w_max] on a samples x samples grid.
CompatReport check_transmission_compat(const BoundaryDataModel& model,
                                       const PermittivityModel& perm, int samples,
                                       double w_max);

struct MConstants {
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double w_max = 0.0;
};

struct MSampling {
  int nx = 33;
  int nz = 17;
  int nw = 64;  // w samples per unit of H
};

/// Sampled sup of the derivative bounds on the (x, z, w) box with
/// w in [-H, w_max], inflated by 5%. The w samples use a fixed spacing and
/// extend to the first sample at or above w_max. The growth constant m2 is set to zero:
/// on a bounded deflection range the w^2 allowance is not needed.
MConstants estimate_m_constants(const BoundaryDataModel& model, double w_max,
                                MSampling sampling = {});

}  // namespace memsflow
