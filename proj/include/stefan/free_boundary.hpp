#pragma once

// Stefan free-boundary solver in front-fixed coordinates xi = r / h(t).
//
// In xi in [0, 1] the logistic equation becomes
//   u_t = d/h^2 (u_xixi + (N-1)/xi u_xi) + xi h'/h u_xi + u (alpha - gamma - beta u),
// with u_xi(0) = 0, u(1) = 0 and the front law h' = -mu u_r(t, h) = -mu u_xi(1) / h.

#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stefan/coeff.hpp"
#include "stefan/eigen.hpp"

namespace stefan {

struct FreeBoundaryState {
  std::vector<double> u;  // values on xi_j = j / n, j = 0..n
  double h = 1.0;
  double t = 0.0;
  double h_prime = 0.0;   // front speed used by the last step

  int n() const { return static_cast<int>(u.size()) - 1; }
  /// u at physical radius r (0 beyond the front).
  double at_radius(double r) const;
  double sup() const;
};

FreeBoundaryState initial_state(const ProblemSpec& spec);

/// -mu u_r(t, h) from the one-sided three-point stencil at xi = 1.
double front_speed(const FreeBoundaryState& state, double mu);

/// One step: explicit front update from the pre-step gradient, explicit
/// reaction, implicit diffusion and front-fixing advection.
/// Throws FrontRetreat on h' < -1e-10 and StepSizeTooLarge when the front CFL
/// (dt h'/h <= dxi/2) or reaction positivity fails.
FreeBoundaryState step_free(const FreeBoundaryState& state, const ProblemSpec& spec, double dt);

struct Snapshot {
  double t = 0.0;
  double h = 0.0;
  std::vector<double> u;  // xi-grid values

  double at_radius(double r) const;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<double> h;
  std::vector<double> h_prime;
  std::vector<double> u_sup;
  std::vector<Snapshot> snapshots;  // at multiples of the period

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
};

struct SimulationOptions {
  double sample_every = 0.0;    // 0: one sample per period
  bool record_snapshots = true;
  /// Checked at each period boundary; returning true ends the run early.
  std::function<bool(const FreeBoundaryState&)> stop;
};

/// Resumable run of the free-boundary problem. Steps of spec.numerics.dt
/// (rounded so a period holds a whole number of steps) are subdivided when
/// the front CFL or reaction positivity would fail.
class Simulation {
 public:
  explicit Simulation(ProblemSpec spec, SimulationOptions opts = {});

  /// Advances to time t_end (rounded to the step grid). Returns false if the
  /// stop predicate fired.
  bool advance_to(double t_end);

  const FreeBoundaryState& state() const noexcept { return state_; }
  const Trajectory& trajectory() const noexcept { return traj_; }
  const ProblemSpec& spec() const noexcept { return spec_; }
  double step_size() const noexcept { return dt_; }
  bool stopped() const noexcept { return stopped_; }

 private:
  void record(bool force_snapshot);
  void substep(double dt, int depth);

  ProblemSpec spec_;
  SimulationOptions opts_;
  FreeBoundaryState state_;
  Trajectory traj_;
  double dt_;
  long long steps_per_period_;
  long long sample_stride_;
  long long step_count_ = 0;
  bool stopped_ = false;
};

/// Runs from (u0, h0) to t_max. Step errors are rethrown with the failing time.
Trajectory simulate(const ProblemSpec& spec, double t_max, double sample_every = 0.0);

enum class Verdict { Spreading, Vanishing, Undecided };

std::string_view to_string(Verdict v);

struct Outcome {
  Verdict verdict = Verdict::Undecided;
  std::string evidence;
  double t_decided = 0.0;
  double h_final = 0.0;
  double u_sup_final = 0.0;
  double h_star = 0.0;           // +inf when no finite threshold was found
  std::optional<double> lambda1; // at h_final, when it was computed
};

/// Lazily computes h* and lambda1(R) for one (field, d, N); safe to share
/// between threads and across simulations with the same (field, d, N).
class EigenOracle {
 public:
  EigenOracle(CoefficientField field, double d, int N, EigenOptions opts = {});

  double lambda1(double R);
  /// +inf when lambda1 stays positive over the expanded bracket.
  double h_star();
  const CoefficientField& field() const noexcept { return field_; }
  double d() const noexcept { return d_; }
  int N() const noexcept { return N_; }
  /// Radius below which lambda1 is certainly positive.
  double small_radius() const;

 private:
  CoefficientField field_;
  double d_;
  int N_;
  EigenOptions opts_;
  std::mutex mutex_;
  std::optional<double> h_star_;
};

/// Spreading when lambda1(h_final) <= -tol or h_final > h* + tol; Vanishing
/// when the density and front speed are below 1e-8 and h_final < h* - tol.
Outcome classify_outcome(const Trajectory& traj, const ProblemSpec& spec, EigenOracle& eigen);

/// The cheap checks of classify_outcome that need no eigen solve beyond h*.
std::optional<Verdict> early_verdict(const FreeBoundaryState& state, double mu, double h_star, double tol);

/// max{max_t alpha_2 / min_t beta_1, sup u0}: the a priori density bound.
double density_bound(const ProblemSpec& spec, double r_max);

}  // namespace stefan
