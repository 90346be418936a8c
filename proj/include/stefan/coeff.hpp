#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stefan/expr.hpp"

namespace stefan {

using SpaceTimeFn = std::function<double(double t, double r)>;
using TimeFn = std::function<double(double t)>;
using ProfileFn = std::function<double(double r)>;

/// Lower/upper bounds of one coefficient as functions of t alone.
struct Envelope {
  TimeFn lower;
  TimeFn upper;
};

struct EnvelopeSet {
  Envelope alpha;
  Envelope gamma;
  Envelope beta;
};

/// T-periodic birth rate alpha, death rate gamma and crowding beta on (t, r).
/// Immutable once built; evaluation is pure and may run on any thread.
class CoefficientField {
 public:
  CoefficientField(SpaceTimeFn alpha, SpaceTimeFn gamma, SpaceTimeFn beta, double period);

  static CoefficientField constant(double alpha, double gamma, double beta, double period = 1.0);

  /// Fields built from expressions remember their source text.
  static CoefficientField from_expressions(const expr::Ast& alpha, const expr::Ast& gamma,
                                           const expr::Ast& beta, double period,
                                           const expr::ParamMap& params = {});

  double alpha(double t, double r) const { return alpha_(t, r); }
  double gamma(double t, double r) const { return gamma_(t, r); }
  double beta(double t, double r) const { return beta_(t, r); }
  /// alpha - gamma, the linearised growth rate.
  double growth(double t, double r) const { return alpha_(t, r) - gamma_(t, r); }
  double period() const noexcept { return period_; }

  /// Copy with user-declared envelopes attached.
  CoefficientField with_envelopes(EnvelopeSet env) const;
  const std::optional<EnvelopeSet>& declared_envelopes() const noexcept { return envelopes_; }

  /// Declared envelopes when present, otherwise phase-wise min/max sampled on
  /// r in [0, r_max].
  EnvelopeSet envelopes(double r_max, int t_samples = 64, int r_samples = 64) const;

  /// Copy whose growth rate is shifted by c (added to alpha).
  CoefficientField shifted_growth(double c) const;

 private:
  SpaceTimeFn alpha_;
  SpaceTimeFn gamma_;
  SpaceTimeFn beta_;
  double period_;
  std::optional<EnvelopeSet> envelopes_;
};

/// Bilinear table: periodic wrap in t over [0, period), clamped in r.
class TabulatedFunction {
 public:
  TabulatedFunction(std::vector<double> t_nodes, std::vector<double> r_nodes,
                    std::vector<double> values, double period);
  double operator()(double t, double r) const;

 private:
  std::vector<double> t_nodes_;
  std::vector<double> r_nodes_;
  std::vector<double> values_;  // row-major: values_[i * r_nodes_.size() + j]
  double period_;
};

struct Numerics {
  int n = 256;           // grid intervals
  double dt = 1e-2;      // time step
  double t_max = 50.0;   // horizon
  double tol = 1e-6;     // period-map / eigen tolerance
  double eig_tol = 1e-3; // margin on lambda1 and h* when classifying

  bool operator==(const Numerics&) const = default;
};

struct ProblemSpec {
  CoefficientField field = CoefficientField::constant(1.0, 0.0, 1.0);
  int N = 2;
  double d = 1.0;
  double mu = 1.0;
  double h0 = 1.0;
  ProfileFn u0;
  Numerics numerics;
};

/// Rounds t_max to the nearest multiple of the period; positive t_max gives
/// at least one period.
double round_horizon(double t_max, double period);

/// cos(pi r / (2 h0)) scaled by amplitude: the default admissible profile.
ProfileFn cosine_profile(double h0, double amplitude = 1.0);

enum class ViolationKind {
  NonFiniteCoefficient,
  EnvelopeViolation,
  NonPositiveEnvelope,
  PeriodicityViolation,
  BoundaryMismatch,
  InitialNotPositive,
  InitialSlopeNonzero,
  InvalidParameter,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string what;
  double t = 0.0;
  double r = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;
  double r_checked = 0.0;  // envelopes hold only up to this radius

  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind kind) const;
};

struct ValidationOptions {
  int t_samples = 64;
  int r_samples = 64;
  double phase_offset = 0.0;
  /// Extra radius covered beyond 4 h0; defaults to the semi-wave truncation 50 sqrt(d).
  std::optional<double> extra_radius;
};

ValidationReport validate(const ProblemSpec& spec, const ValidationOptions& opts = {});

/// Throws the Error matching the first violation, if any.
void require_valid(const ProblemSpec& spec);

enum class HabitatClass { Favorable, Unfavorable, Neutral };

std::string_view to_string(HabitatClass c);

struct HabitatReport {
  double favorable_fraction = 0.0;
  double unfavorable_fraction = 0.0;
  double mean_birth = 0.0;
  double mean_death = 0.0;
  HabitatClass classification = HabitatClass::Neutral;
};

/// Time integral of alpha - gamma by composite trapezoid; sign decides the site.
double site_time_integral(const CoefficientField& field, double r, int time_nodes = 256);

HabitatReport classify_habitat(const CoefficientField& field, double R, int samples, int N = 2,
                               int time_nodes = 256);

}  // namespace stefan
