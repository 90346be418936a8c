#pragma once

// Semi-wave speed machinery: the periodic logistic ODE V' = V (a - b V), the
// half-line problem
//   U_t - d U_rr + k(t) U_r = U (a(t) - b(t) U),  U(t, 0) = 0,  U -> V(t),
// and the T-periodic drift k0 with mu U_r(t, 0) = k0(t).

#include <vector>

#include "stefan/coeff.hpp"
#include "stefan/free_boundary.hpp"

namespace stefan {

class PeriodicLogisticSolution {
 public:
  PeriodicLogisticSolution() = default;
  PeriodicLogisticSolution(double period, std::vector<double> values, std::vector<double> slopes, int iterations);

  /// Cubic Hermite interpolation between the stored phases, periodic in t.
  double operator()(double t) const;
  double period() const noexcept { return period_; }
  /// V at phases j T / m for j = 0..m (first and last coincide).
  const std::vector<double>& values() const noexcept { return values_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double period_ = 1.0;
  std::vector<double> values_;
  std::vector<double> slopes_;
  int iterations_ = 0;
};

/// RK4 period map iterated from V(0) = mean(a)/mean(b) to a fixed point
/// (|P(v) - v| <= 1e-10 (1 + v)). Throws NonPositive when mean(a) <= 0 or the
/// orbit leaves (0, inf), NoConvergence after max_periods.
PeriodicLogisticSolution periodic_logistic(const TimeFn& a, const TimeFn& b, double T, int steps = 2048,
                                           int max_periods = 100000);

struct SemiWaveOptions {
  double L = 0.0;       // 0: 50 sqrt(d)
  int n = 2048;
  int steps = 0;        // per period; 0: max(200, ceil(T / 0.005))
  double tol = 1e-10;   // period-to-period change relative to 1 + sup U
  int max_periods = 20000;
};

struct SemiWaveProfile {
  bool zero = false;
  double L = 0.0;
  int n = 0;
  double period = 1.0;
  /// U at the step times s T / steps, s = 0..steps-1.
  std::vector<std::vector<double>> orbit;
  /// U_r(t_s, 0) from the one-sided three-point stencil.
  std::vector<double> slope0;
  int periods = 0;
  double residual = 0.0;

  double dr() const { return L / n; }
  std::size_t phases() const { return orbit.size(); }
  double value(std::size_t phase, double r) const;
};

/// Periodic attractor of the half-line problem truncated to [0, L] with
/// U(t, L) = V(t). Returns zero when mean(a) <= mean(k)^2 / (4 d). Throws
/// TruncationTooSmall when U(t, L/2) misses V(t) by more than 1%.
SemiWaveProfile semiwave_profile(const TimeFn& k, const TimeFn& a, const TimeFn& b, double d, double T,
                                 const SemiWaveOptions& opts = {});

struct SpeedOptions {
  double tol = 1e-7;
  double relax = 0.5;
  int max_iterations = 400;
  SemiWaveOptions profile;
};

struct SpeedResult {
  std::vector<double> k0;  // at the profile step times
  double c = 0.0;          // time mean of k0
  double bound = 0.0;      // 2 sqrt(d mean(a))
  SemiWaveProfile profile;
  int iterations = 0;
  double residual = 0.0;
  double relax = 0.0;      // relaxation in force at convergence
};

/// Damped iteration k <- (1 - w) k + w mu U^k_r(., 0) from k = 0. The
/// relaxation w is halved when the residual grows twice in a row. Throws
/// BoundViolated if c leaves (0, 2 sqrt(d mean(a))).
SpeedResult k0_fixed_point(double mu, const TimeFn& a, const TimeFn& b, double d, double T,
                           const SpeedOptions& opts = {});

struct EnvelopeSpeeds {
  double c_upper = 0.0;  // from (eta^*, beta_1)
  double c_lower = 0.0;  // from (eta_*, beta_2)
  /// Far-field envelopes at the profile step times, eps already applied.
  std::vector<double> eta_upper, eta_lower, beta_lower, beta_upper;
  SpeedResult upper, lower;
};

struct EnvelopeOptions {
  double eps = 0.0;
  double R_star = 10.0;
  int r_samples = 64;
  SpeedOptions speed;
};

/// Phase-wise max/min of alpha - gamma and beta over r in [R_*, 10 R_*]
/// widened by eps, then k0 for both envelope pairs (computed concurrently).
/// Throws HypothesisHFailed when eta_* has nonpositive mean.
EnvelopeSpeeds envelope_speeds(const CoefficientField& field, double mu, double d,
                               const EnvelopeOptions& opts = {});

struct FrontSpeed {
  double slope = 0.0;         // least squares over the trailing window
  double ratio = 0.0;         // h(t_final) / t_final
  std::size_t samples = 0;
};

/// Throws NotSpreading when the front has stalled (slope <= 1e-8) or the
/// density has died out.
FrontSpeed measure_front_speed(const Trajectory& traj, double window_fraction = 0.25);

}  // namespace stefan
