#pragma once

// Principal eigenvalue of the T-periodic parabolic Dirichlet problem on B_R
//
//   phi_t - d Lap phi = (alpha - gamma) phi + lambda phi,  phi = 0 on |x| = R,
//   phi(0) = phi(T),
//
// computed from the dominant Floquet multiplier rho of the period map of the
// linear equation psi_t = d Lap psi + (alpha - gamma) psi: lambda1 = -ln(rho)/T.

#include <optional>
#include <span>
#include <vector>

#include "stefan/coeff.hpp"
#include "stefan/radial.hpp"

namespace stefan {

struct EigenOptions {
  int n = 512;
  /// Explicit substeps per period; 0 picks max(256, ceil(T / dt_max)).
  int substeps = 0;
  /// Bound on d * mu_D * dt, with mu_D an estimate of the Dirichlet ground
  /// eigenvalue of B_R; keeps the backward-Euler bias small.
  double time_accuracy = 2e-4;
  double dt_cap = 1e-2;
  /// Upper limit on automatic substeps; only binds when d / R^2 is large,
  /// where lambda1 is far from 0.
  int max_substeps = 20000;
  double tol = 1e-9;
  int max_iterations = 20000;
  int phases = 32;
  /// Starting vector by node index (resized grids reuse it as a warm start).
  std::vector<double> initial;
};

struct EigenResult {
  double lambda1 = 0.0;
  double rho = 0.0;
  int iterations = 0;
  double residual = 0.0;  // sup |P phi - rho phi| / rho on the final iterate
  RadialGrid grid;
  int substeps = 0;
  std::vector<FieldOnGrid> phi;  // eigenfunction at phase samples, max over all = 1
};

/// Substeps per period used for a given radius and diffusion.
int eigen_substeps(double d, double R, int N, double T, const EigenOptions& opts);

/// psi(T) for the linear equation started from psi on the grid: the
/// potential acts through exp(dt q(t + dt/2, r)), diffusion is backward Euler.
FieldOnGrid period_map(const FieldOnGrid& psi, double d, const CoefficientField& field,
                       const RadialGrid& grid, int substeps);

EigenResult principal_eigenvalue(double d, const CoefficientField& field, double R, int N,
                                 const EigenOptions& opts = {});

struct HStarResult {
  bool infinite = false;   // lambda1 still positive at the (expanded) upper end
  double value = 0.0;      // h* when finite
  double lo = 0.0, hi = 0.0;
  int evaluations = 0;
};

/// Radius where lambda1(R) crosses 0, located by bisection. Throws
/// BracketInvalid when lambda1(r_lo) <= 0.
HStarResult h_star(double d, const CoefficientField& field, int N, double r_lo, double r_hi,
                   double tol = 1e-4, const EigenOptions& opts = {});

struct DScanPoint {
  double d;
  double lambda1;
};

struct DThresholds {
  double d_star = 0.0;   // first crossing of lambda1(d) through 0
  double d_upper = 0.0;  // last crossing
  int crossings = 0;
  std::vector<DScanPoint> scan;
};

/// Scans lambda1 on a geometric d-grid, then bisects the first and last sign
/// changes. Throws NoSignChange when the scan keeps one sign.
DThresholds d_thresholds(const CoefficientField& field, double R, int N, double d_lo, double d_hi,
                         double tol = 1e-4, int scan_points = 32, const EigenOptions& opts = {});

}  // namespace stefan
