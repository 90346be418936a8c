#include "stefan/coeff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include <fmt/format.h>

namespace stefan {

CoefficientField::CoefficientField(SpaceTimeFn alpha, SpaceTimeFn gamma, SpaceTimeFn beta,
                                   double period)
    : alpha_(std::move(alpha)), gamma_(std::move(gamma)), beta_(std::move(beta)), period_(period) {
  if (!(period > 0.0) || !std::isfinite(period))
    throw Error(ErrorCode::InvalidArgument, "period must be positive");
}

CoefficientField CoefficientField::constant(double alpha, double gamma, double beta, double period) {
  auto c = [](double v) { return [v](double, double) { return v; }; };
  auto k = [](double v) { return TimeFn([v](double) { return v; }); };
  CoefficientField f(c(alpha), c(gamma), c(beta), period);
  f.envelopes_ = EnvelopeSet{{k(alpha), k(alpha)}, {k(gamma), k(gamma)}, {k(beta), k(beta)}};
  return f;
}

CoefficientField CoefficientField::from_expressions(const expr::Ast& alpha, const expr::Ast& gamma,
                                                    const expr::Ast& beta, double period,
                                                    const expr::ParamMap& params) {
  auto wrap = [&](const expr::Ast& ast) {
    auto prog = std::make_shared<const expr::Compiled>(ast, params);
    return [prog](double t, double r) { return (*prog)(t, r); };
  };
  return CoefficientField(wrap(alpha), wrap(gamma), wrap(beta), period);
}

CoefficientField CoefficientField::with_envelopes(EnvelopeSet env) const {
  CoefficientField copy = *this;
  copy.envelopes_ = std::move(env);
  return copy;
}

CoefficientField CoefficientField::shifted_growth(double c) const {
  CoefficientField copy = *this;
  auto a = alpha_;
  copy.alpha_ = [a, c](double t, double r) { return a(t, r) + c; };
  if (copy.envelopes_) {
    auto lo = copy.envelopes_->alpha.lower;
    auto hi = copy.envelopes_->alpha.upper;
    copy.envelopes_->alpha = {[lo, c](double t) { return lo(t) + c; },
                              [hi, c](double t) { return hi(t) + c; }};
  }
  return copy;
}

namespace {

// Periodic piecewise-linear function through equally spaced phase samples.
TimeFn periodic_linear(std::vector<double> samples, double period) {
  auto data = std::make_shared<const std::vector<double>>(std::move(samples));
  return [data, period](double t) {
    const auto& v = *data;
    const double m = static_cast<double>(v.size());
    double phase = std::fmod(t, period);
    if (phase < 0) phase += period;
    double x = phase / period * m;
    auto i = static_cast<std::size_t>(x);
    if (i >= v.size()) i = v.size() - 1;
    double w = x - static_cast<double>(i);
    return (1.0 - w) * v[i] + w * v[(i + 1) % v.size()];
  };
}

}  // namespace

EnvelopeSet CoefficientField::envelopes(double r_max, int t_samples, int r_samples) const {
  if (envelopes_) return *envelopes_;
  std::vector<double> alo(t_samples), ahi(t_samples), glo(t_samples), ghi(t_samples), blo(t_samples),
      bhi(t_samples);
  for (int i = 0; i < t_samples; ++i) {
    double t = period_ * i / t_samples;
    double inf = std::numeric_limits<double>::infinity();
    alo[i] = glo[i] = blo[i] = inf;
    ahi[i] = ghi[i] = bhi[i] = -inf;
    for (int j = 0; j < r_samples; ++j) {
      double r = r_max * j / (r_samples - 1);
      double a = alpha_(t, r), g = gamma_(t, r), b = beta_(t, r);
      alo[i] = std::min(alo[i], a);
      ahi[i] = std::max(ahi[i], a);
      glo[i] = std::min(glo[i], g);
      ghi[i] = std::max(ghi[i], g);
      blo[i] = std::min(blo[i], b);
      bhi[i] = std::max(bhi[i], b);
    }
  }
  return EnvelopeSet{{periodic_linear(alo, period_), periodic_linear(ahi, period_)},
                     {periodic_linear(glo, period_), periodic_linear(ghi, period_)},
                     {periodic_linear(blo, period_), periodic_linear(bhi, period_)}};
}

TabulatedFunction::TabulatedFunction(std::vector<double> t_nodes, std::vector<double> r_nodes,
                                     std::vector<double> values, double period)
    : t_nodes_(std::move(t_nodes)),
      r_nodes_(std::move(r_nodes)),
      values_(std::move(values)),
      period_(period) {
  if (t_nodes_.empty() || r_nodes_.empty() || values_.size() != t_nodes_.size() * r_nodes_.size())
    throw Error(ErrorCode::InvalidArgument, "table shape mismatch");
  if (!std::is_sorted(t_nodes_.begin(), t_nodes_.end()) ||
      !std::is_sorted(r_nodes_.begin(), r_nodes_.end()))
    throw Error(ErrorCode::InvalidArgument, "table nodes must be increasing");
  if (t_nodes_.front() < 0.0 || t_nodes_.back() >= period_)
    throw Error(ErrorCode::InvalidArgument, "table time nodes must lie in [0, period)");
}

double TabulatedFunction::operator()(double t, double r) const {
  const std::size_t nt = t_nodes_.size(), nr = r_nodes_.size();
  double phase = std::fmod(t, period_);
  if (phase < 0) phase += period_;

  // time bracket with periodic wrap: node i0 at time t0, node i1 at t1 > t0
  std::size_t i1 = static_cast<std::size_t>(
      std::upper_bound(t_nodes_.begin(), t_nodes_.end(), phase) - t_nodes_.begin());
  std::size_t i0;
  double t0, t1;
  if (i1 == 0) {
    i0 = nt - 1;
    t0 = t_nodes_[i0] - period_;
    t1 = t_nodes_[0];
  } else if (i1 == nt) {
    i0 = nt - 1;
    i1 = 0;
    t0 = t_nodes_[i0];
    t1 = t_nodes_[0] + period_;
  } else {
    i0 = i1 - 1;
    t0 = t_nodes_[i0];
    t1 = t_nodes_[i1];
  }
  double wt = t1 > t0 ? (phase - t0) / (t1 - t0) : 0.0;

  double rc = std::clamp(r, r_nodes_.front(), r_nodes_.back());
  std::size_t j1 = static_cast<std::size_t>(
      std::upper_bound(r_nodes_.begin(), r_nodes_.end(), rc) - r_nodes_.begin());
  j1 = std::clamp<std::size_t>(j1, 1, nr - 1);
  std::size_t j0 = nr == 1 ? 0 : j1 - 1;
  if (nr == 1) j1 = 0;
  double wr = (nr > 1 && r_nodes_[j1] > r_nodes_[j0]) ? (rc - r_nodes_[j0]) / (r_nodes_[j1] - r_nodes_[j0])
                                                      : 0.0;

  auto at = [&](std::size_t i, std::size_t j) { return values_[i * nr + j]; };
  double v0 = (1 - wr) * at(i0, j0) + wr * at(i0, j1);
  double v1 = (1 - wr) * at(i1, j0) + wr * at(i1, j1);
  return (1 - wt) * v0 + wt * v1;
}

double round_horizon(double t_max, double period) {
  if (!(t_max > 0)) return 0.0;
  const double k = std::max(1.0, std::round(t_max / period));
  return k * period;
}

ProfileFn cosine_profile(double h0, double amplitude) {
  return [h0, amplitude](double r) { return amplitude * std::cos(std::numbers::pi * r / (2.0 * h0)); };
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::NonFiniteCoefficient: return "NonFiniteCoefficient";
    case ViolationKind::EnvelopeViolation: return "EnvelopeViolation";
    case ViolationKind::NonPositiveEnvelope: return "NonPositiveEnvelope";
    case ViolationKind::PeriodicityViolation: return "PeriodicityViolation";
    case ViolationKind::BoundaryMismatch: return "BoundaryMismatch";
    case ViolationKind::InitialNotPositive: return "InitialNotPositive";
    case ViolationKind::InitialSlopeNonzero: return "InitialSlopeNonzero";
    case ViolationKind::InvalidParameter: return "InvalidParameter";
  }
  return "Unknown";
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

namespace {

// Evaluates f, converting expression domain errors into NaN so the caller
// reports a NonFiniteCoefficient with coordinates.
template <class F>
double safe_eval(const F& f, double t, double r) {
  try {
    return f(t, r);
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

ValidationReport validate(const ProblemSpec& spec, const ValidationOptions& opts) {
  ValidationReport report;
  auto add = [&](ViolationKind k, std::string what, double t = 0.0, double r = 0.0) {
    report.violations.push_back({k, std::move(what), t, r});
  };

  const Numerics& num = spec.numerics;
  if (spec.N < 2) add(ViolationKind::InvalidParameter, "N must be >= 2");
  if (!(spec.d > 0)) add(ViolationKind::InvalidParameter, "d must be positive");
  if (!(spec.mu > 0)) add(ViolationKind::InvalidParameter, "mu must be positive");
  if (!(spec.h0 > 0)) add(ViolationKind::InvalidParameter, "h0 must be positive");
  if (!(num.dt > 0)) add(ViolationKind::InvalidParameter, "dt must be positive");
  if (num.n < 16) add(ViolationKind::InvalidParameter, "n must be >= 16");
  if (!(num.t_max >= 0)) add(ViolationKind::InvalidParameter, "t_max must be nonnegative");
  if (!spec.u0) add(ViolationKind::InvalidParameter, "initial profile missing");
  if (!report.ok()) return report;

  const CoefficientField& field = spec.field;
  const double T = field.period();
  const double extra = opts.extra_radius.value_or(50.0 * std::sqrt(spec.d));
  const double r_check = 4.0 * spec.h0 + extra;
  report.r_checked = r_check;

  const int nt = std::max(opts.t_samples, 2);
  const int nr = std::max(opts.r_samples, 2);
  const EnvelopeSet env = field.envelopes(r_check, nt, nr);

  struct Coef {
    const char* name;
    std::function<double(double, double)> f;
    const Envelope* envelope;
  };
  const Coef coefs[] = {
      {"alpha", [&](double t, double r) { return field.alpha(t, r); }, &env.alpha},
      {"gamma", [&](double t, double r) { return field.gamma(t, r); }, &env.gamma},
      {"beta", [&](double t, double r) { return field.beta(t, r); }, &env.beta},
  };

  for (const Coef& c : coefs) {
    bool periodic_reported = false, envelope_reported = false, finite_reported = false,
         positive_reported = false;
    for (int i = 0; i < nt; ++i) {
      const double t = opts.phase_offset + T * i / nt;
      const double lo = safe_eval([&](double tt, double) { return c.envelope->lower(tt); }, t, 0.0);
      const double hi = safe_eval([&](double tt, double) { return c.envelope->upper(tt); }, t, 0.0);
      // a vanishing death rate is allowed, birth and crowding must stay positive
      const bool may_vanish = c.envelope == &env.gamma;
      if (!positive_reported && !(may_vanish ? lo >= 0.0 : lo > 0.0)) {
        add(ViolationKind::NonPositiveEnvelope, fmt::format("{} lower envelope {} too small", c.name, lo), t);
        positive_reported = true;
      }
      for (int j = 0; j < nr; ++j) {
        const double r = r_check * j / (nr - 1);
        const double v = safe_eval(c.f, t, r);
        const double w = safe_eval(c.f, t + T, r);
        if (!std::isfinite(v) || !std::isfinite(w)) {
          if (!finite_reported)
            add(ViolationKind::NonFiniteCoefficient, fmt::format("{} is not finite", c.name), t, r);
          finite_reported = true;
          continue;
        }
        if (!periodic_reported && std::fabs(w - v) > 1e-10 * (1.0 + std::fabs(v))) {
          add(ViolationKind::PeriodicityViolation,
              fmt::format("{}(t+T,r) - {}(t,r) = {:.3g}", c.name, c.name, w - v), t, r);
          periodic_reported = true;
        }
        const double slack = 1e-12 * (1.0 + std::fabs(v));
        if (!envelope_reported && (v < lo - slack || v > hi + slack)) {
          add(ViolationKind::EnvelopeViolation,
              fmt::format("{} = {} outside [{}, {}]", c.name, v, lo, hi), t, r);
          envelope_reported = true;
        }
      }
    }
  }

  // initial profile: u0(h0) = 0, u0 > 0 inside, u0'(0) = 0
  const auto& u0 = spec.u0;
  const double h0 = spec.h0;
  auto u0_safe = [&](double r) { return safe_eval([&](double, double rr) { return u0(rr); }, 0.0, r); };
  double scale = 0.0;
  for (int j = 0; j <= 64; ++j) scale = std::max(scale, std::fabs(u0_safe(h0 * j / 64.0)));
  if (!std::isfinite(scale)) {
    add(ViolationKind::InvalidParameter, "initial profile is not finite on [0, h0]");
    return report;
  }
  scale = std::max(scale, std::numeric_limits<double>::min());
  const double at_front = u0_safe(h0);
  if (std::fabs(at_front) > 1e-6 * scale)
    add(ViolationKind::BoundaryMismatch, fmt::format("u0(h0) = {}", at_front), 0.0, h0);
  for (int j = 0; j < 64; ++j) {
    const double r = h0 * j / 64.0;
    if (!(u0_safe(r) > 0.0)) {
      add(ViolationKind::InitialNotPositive, fmt::format("u0({}) = {}", r, u0_safe(r)), 0.0, r);
      break;
    }
  }
  const double delta = 1e-4 * h0;
  const double slope = (-3.0 * u0_safe(0.0) + 4.0 * u0_safe(delta) - u0_safe(2.0 * delta)) / (2.0 * delta);
  if (std::fabs(slope) > 1e-6 * scale / h0)
    add(ViolationKind::InitialSlopeNonzero, fmt::format("u0'(0) = {}", slope));

  return report;
}

void require_valid(const ProblemSpec& spec) {
  ValidationReport report = validate(spec);
  if (report.ok()) return;
  const Violation& v = report.violations.front();
  ErrorCode code = v.kind == ViolationKind::NonFiniteCoefficient ? ErrorCode::NonFiniteCoefficient
                   : v.kind == ViolationKind::EnvelopeViolation  ? ErrorCode::EnvelopeViolation
                                                                 : ErrorCode::InvalidArgument;
  throw Error(code, fmt::format("{}: {} at (t={}, r={})", to_string(v.kind), v.what, v.t, v.r));
}

std::string_view to_string(HabitatClass c) {
  switch (c) {
    case HabitatClass::Favorable: return "Favorable";
    case HabitatClass::Unfavorable: return "Unfavorable";
    case HabitatClass::Neutral: return "Neutral";
  }
  return "Unknown";
}

double site_time_integral(const CoefficientField& field, double r, int time_nodes) {
  const double T = field.period();
  const double h = T / time_nodes;
  double sum = 0.5 * (field.growth(0.0, r) + field.growth(T, r));
  for (int i = 1; i < time_nodes; ++i) sum += field.growth(i * h, r);
  return sum * h;
}

HabitatReport classify_habitat(const CoefficientField& field, double R, int samples, int N,
                               int time_nodes) {
  if (!(R > 0) || samples < 16 || time_nodes < 256)
    throw Error(ErrorCode::InvalidArgument, "classify_habitat needs R > 0, samples >= 16, >= 256 time nodes");
  const double T = field.period();
  const double ht = T / time_nodes;
  HabitatReport rep;
  int fav = 0, unfav = 0;
  double wsum = 0.0, birth = 0.0, death = 0.0;
  for (int j = 0; j < samples; ++j) {
    const double r = R * j / (samples - 1);
    double a_int = 0.0, g_int = 0.0, mag = 0.0;
    for (int i = 0; i <= time_nodes; ++i) {
      const double w = (i == 0 || i == time_nodes) ? 0.5 : 1.0;
      const double a = field.alpha(i * ht, r), g = field.gamma(i * ht, r);
      a_int += w * a;
      g_int += w * g;
      mag += w * (std::fabs(a) + std::fabs(g));
    }
    a_int *= ht;
    g_int *= ht;
    mag *= ht;
    const double net = a_int - g_int;
    const double site_tol = 1e-8 * (T + mag);
    if (net > site_tol) ++fav;
    if (net < -site_tol) ++unfav;

    // trapezoid in r with the radial volume weight r^(N-1)
    const double wr = ((j == 0 || j == samples - 1) ? 0.5 : 1.0) * std::pow(r, N - 1);
    wsum += wr;
    birth += wr * a_int;
    death += wr * g_int;
  }
  rep.favorable_fraction = static_cast<double>(fav) / samples;
  rep.unfavorable_fraction = static_cast<double>(unfav) / samples;
  rep.mean_birth = birth / (wsum * T);
  rep.mean_death = death / (wsum * T);
  const double diff = rep.mean_birth - rep.mean_death;
  const double band = 1e-8 * (1.0 + std::fabs(rep.mean_birth) + std::fabs(rep.mean_death));
  rep.classification = diff > band    ? HabitatClass::Favorable
                       : diff < -band ? HabitatClass::Unfavorable
                                      : HabitatClass::Neutral;
  return rep;
}

}  // namespace stefan
