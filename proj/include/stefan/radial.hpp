#pragma once

// Radial finite differences on the ball B_R in N dimensions.
//
// Nodes r_j = j * dr, j = 0..n. The Laplacian u_rr + (N-1)/r u_r uses central
// differences in the interior and the symmetry limit N * u_rr at r = 0, written
// with a reflected ghost node as 2N (u_1 - u_0) / dr^2.

#include <optional>
#include <span>
#include <vector>

#include "stefan/coeff.hpp"

namespace stefan {

struct RadialGrid {
  int n = 256;     // number of intervals; nodes 0..n
  double R = 1.0;  // outer radius
  int N = 2;       // spatial dimension

  double dr() const { return R / n; }
  double node(int j) const { return R * j / n; }
  std::size_t size() const { return static_cast<std::size_t>(n) + 1; }
};

struct FieldOnGrid {
  std::vector<double> u;
  double t = 0.0;
};

enum class OuterBoundary { Dirichlet, Neumann };

/// Tridiagonal system: lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1] = rhs[i].
/// Solved in place into rhs. Throws SolverSingular on a pivot below 1e-14.
void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs);

/// Discrete Laplacian at every node. The last node uses the ghost reflection
/// for Neumann and is left 0 for Dirichlet.
std::vector<double> radial_laplacian(const RadialGrid& grid, std::span<const double> u,
                                     OuterBoundary outer = OuterBoundary::Dirichlet);

/// Coefficients of the discrete Laplacian row j (lower, diag, upper).
struct StencilRow {
  double lower, diag, upper;
};
StencilRow laplacian_row(const RadialGrid& grid, int j, OuterBoundary outer);

/// Backward-Euler diffusion solve (I - k L) x = b with k = dt * d, factored
/// once and reused while k is unchanged.
class ImplicitDiffusion {
 public:
  ImplicitDiffusion(RadialGrid grid, OuterBoundary outer = OuterBoundary::Dirichlet);
  void solve(double k, std::span<double> rhs);
  const RadialGrid& grid() const noexcept { return grid_; }

 private:
  void factor(double k);

  RadialGrid grid_;
  OuterBoundary outer_;
  double k_ = -1.0;
  std::vector<double> lower_, upper_prime_, inv_pivot_;
};

/// Explicit logistic reaction at time t followed by implicit diffusion:
///   (I - dt d L) u^{k+1} = u^k + dt u^k (alpha - gamma - beta u^k).
/// Throws StepSizeTooLarge when dt * alpha >= 1 or the reaction update would
/// turn a node negative.
FieldOnGrid step_reaction_diffusion(const RadialGrid& grid, const FieldOnGrid& u,
                                    const CoefficientField& field, double d, double dt,
                                    OuterBoundary outer = OuterBoundary::Dirichlet);

/// Reusable stepper for long runs; same scheme as step_reaction_diffusion.
class ReactionDiffusionStepper {
 public:
  ReactionDiffusionStepper(RadialGrid grid, const CoefficientField& field, double d,
                           OuterBoundary outer = OuterBoundary::Dirichlet);
  void step(FieldOnGrid& u, double dt);

 private:
  ImplicitDiffusion diffusion_;
  const CoefficientField& field_;
  double d_;
  OuterBoundary outer_;
  std::vector<double> radii_;
};

struct AttractorOptions {
  double tol = 1e-6;
  int max_periods = 2000;
  double dt = 1e-2;
  int phases = 32;
  double zero_threshold = 1e-8;
};

struct AttractorResult {
  bool zero = false;
  std::vector<FieldOnGrid> orbit;  // phase samples over one period, starting at t = kT
  int periods = 0;
  double residual = 0.0;
};

/// Evolves the fixed-domain logistic problem period by period until the
/// period map settles or the solution falls below the vanishing threshold.
AttractorResult periodic_attractor(const RadialGrid& grid, const CoefficientField& field, double d,
                                   std::span<const double> u_init, const AttractorOptions& opts = {});

struct EntireSpaceOptions {
  std::vector<double> R_list{10.0, 20.0, 40.0, 80.0};
  double dr = 0.05;
  double tol = 1e-5;  // on the sup difference over the core [0, R_list[0] / 2]
  AttractorOptions attractor{.tol = 1e-7};
};

struct EntireSpaceResult {
  bool zero = false;
  RadialGrid grid;                   // grid of the last attractor
  std::vector<FieldOnGrid> orbit;    // last attractor
  std::vector<double> differences;   // sup difference on the core between successive radii
  double R_used = 0.0;

  /// Linear interpolation of U at phase index p and radius r.
  double value(std::size_t phase, double r) const;
};

/// Approximates the entire-space periodic solution by attractors on growing balls.
/// Throws DomainNotLargeEnough when successive radii still disagree on the core.
EntireSpaceResult entire_space_periodic(const CoefficientField& field, double d, int N,
                                        const EntireSpaceOptions& opts = {});

/// Linear interpolation of grid values at radius r (0 beyond R).
double interpolate(const RadialGrid& grid, std::span<const double> u, double r);

}  // namespace stefan
