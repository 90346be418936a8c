#pragma once

// Simulation-driven thresholds: mu* (spreading iff mu > mu*), sigma0
// (spreading iff u0 = sigma zeta with sigma > sigma0) and the four
// qualitative regimes of slow/fast diffusion and large/small habitat.

#include <string>
#include <vector>

#include "stefan/coeff.hpp"
#include "stefan/free_boundary.hpp"

namespace stefan {

struct HorizonPolicy {
  double initial_periods = 50.0;
  double cap_periods = 1600.0;  // five doublings of the initial horizon
  int max_escalations = 5;
  double scale = 1.0;  // multiplies both horizons (--horizon-scale)
  bool early_stop = true;
};

struct Decision {
  Outcome outcome;
  Trajectory trajectory;
  int escalations = 0;
  bool undecided_at_first = false;
};

/// One probe: simulate to the initial horizon (stopping at the first period
/// boundary where the cheap verdict fires), then keep running with the
/// horizon doubled while the verdict is Undecided, up to the cap. The stop
/// predicate of sim is replaced when policy.early_stop is set.
Decision decide(const ProblemSpec& spec, EigenOracle& eigen, const HorizonPolicy& policy = {},
                SimulationOptions sim = {.sample_every = 0.0, .record_snapshots = false, .stop = {}});

struct ThresholdResult {
  double value = 0.0;
  double lo = 0.0, hi = 0.0;
  Verdict verdict_lo = Verdict::Undecided;
  Verdict verdict_hi = Verdict::Undecided;
  int evaluations = 0;
  int undecided_encounters = 0;
  /// The lambda1(h0) <= 0 branch: spreading for every parameter value.
  bool unconditional = false;
  /// Spreading could not be certified at the upper end: value is a lower bound.
  bool lower_bound_only = false;
  std::string evidence;
};

/// Bisection (geometric midpoints) on mu until hi - lo <= tol (1 + value).
/// Throws BracketInvalid when mu_lo does not vanish or mu_hi does not spread,
/// TooManyUndecided when a probe stays Undecided at the horizon cap.
ThresholdResult mu_star(const ProblemSpec& spec, double mu_lo, double mu_hi, double tol = 0.01,
                        const HorizonPolicy& policy = {});

/// Same protocol on sigma with u0 = sigma zeta.
ThresholdResult sigma0(const ProblemSpec& spec, const ProfileFn& zeta, double sigma_lo, double sigma_hi,
                       double tol = 0.01, const HorizonPolicy& policy = {});

enum class Regime { SlowDiffusion, FastDiffusion, LargeHabitat, SmallHabitat };

std::string_view to_string(Regime r);

struct RegimeRun {
  std::string label;       // tiny / medium / huge
  double amplitude = 0.0;  // u0 = amplitude * cos(pi r / (2 h0))
  Verdict verdict = Verdict::Undecided;
  std::optional<Verdict> expected;
  std::string evidence;
};

struct CriteriaReport {
  Regime regime = Regime::SlowDiffusion;
  double d = 0.0;
  double h0 = 0.0;
  double h_star = 0.0;
  double d_star = 0.0;
  double d_upper = 0.0;
  std::vector<RegimeRun> runs;
  bool matches = true;
  std::string note;
};

/// Picks d or h0 inside the regime (d*/2, 2 d^, 1.2 h*, 0.5 h*), runs three
/// amplitudes and compares with the predicted outcomes. Mismatches and
/// failures are reported, not thrown.
CriteriaReport criteria_experiment(Regime regime, const ProblemSpec& spec, const HorizonPolicy& policy = {});

}  // namespace stefan
