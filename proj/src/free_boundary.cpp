#include "stefan/free_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "stefan/error.hpp"
#include "stefan/radial.hpp"

namespace stefan {

namespace {

constexpr double kRetreatTolerance = 1e-10;
constexpr double kClip = 1e-12;
constexpr double kDecayed = 1e-8;

double xi_interpolate(std::span<const double> u, double h, double r) {
  if (r < 0.0) r = 0.0;
  if (r >= h) return 0.0;
  const int n = static_cast<int>(u.size()) - 1;
  const double x = r / h * n;
  const int j = std::min(static_cast<int>(x), n - 1);
  const double w = x - j;
  return (1.0 - w) * u[j] + w * u[j + 1];
}

double sup_of(std::span<const double> u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace

double FreeBoundaryState::at_radius(double r) const { return xi_interpolate(u, h, r); }
double FreeBoundaryState::sup() const { return sup_of(u); }
double Snapshot::at_radius(double r) const { return xi_interpolate(u, h, r); }

FreeBoundaryState initial_state(const ProblemSpec& spec) {
  const int n = spec.numerics.n;
  if (n < 4) throw Error(ErrorCode::InvalidArgument, fmt::format("grid needs n >= 4, got {}", n));
  if (!(spec.h0 > 0)) throw Error(ErrorCode::InvalidArgument, "h0 must be positive");
  if (!spec.u0) throw Error(ErrorCode::InvalidArgument, "initial profile missing");
  FreeBoundaryState s;
  s.h = spec.h0;
  s.u.resize(n + 1);
  for (int j = 0; j < n; ++j) s.u[j] = std::max(0.0, spec.u0(spec.h0 * j / n));
  s.u[n] = 0.0;
  s.h_prime = front_speed(s, spec.mu);
  return s;
}

double front_speed(const FreeBoundaryState& state, double mu) {
  const int n = state.n();
  const double dxi = 1.0 / n;
  // u_n = 0 drops out of (3 u_n - 4 u_{n-1} + u_{n-2}) / (2 dxi)
  const double u_xi = (-4.0 * state.u[n - 1] + state.u[n - 2]) / (2.0 * dxi);
  return -mu * u_xi / state.h;
}

FreeBoundaryState step_free(const FreeBoundaryState& state, const ProblemSpec& spec, double dt) {
  const int n = state.n();
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "state grid too small");
  const double dxi = 1.0 / n;
  const CoefficientField& f = spec.field;

  double hp = front_speed(state, spec.mu);
  if (hp < -kRetreatTolerance)
    throw Error(ErrorCode::FrontRetreat, fmt::format("h' = {} at t = {}, h = {}", hp, state.t, state.h));
  hp = std::max(hp, 0.0);
  if (dt * hp / state.h > 0.5 * dxi)
    throw Error(ErrorCode::StepSizeTooLarge,
                fmt::format("front CFL: dt h'/h = {} > dxi/2 = {}", dt * hp / state.h, 0.5 * dxi));

  FreeBoundaryState next;
  next.h = state.h + dt * hp;
  next.t = state.t + dt;
  next.h_prime = hp;
  next.u.resize(n + 1);

  // explicit reaction at the pre-step radii
  for (int j = 0; j < n; ++j) {
    const double r = state.h * j * dxi;
    const double a = f.alpha(state.t, r);
    const double factor = 1.0 + dt * (a - f.gamma(state.t, r) - f.beta(state.t, r) * state.u[j]);
    if (dt * a >= 1.0 || factor < 0.0)
      throw Error(ErrorCode::StepSizeTooLarge,
                  fmt::format("dt = {} breaks positivity at r = {} (factor {})", dt, r, factor));
    next.u[j] = state.u[j] * factor;
  }
  next.u[n] = 0.0;

  // implicit diffusion d/h^2 L_xi plus advection xi h'/h d/dxi; central
  // differences unless the cell Peclet number would break the M-matrix sign
  // pattern, then forward (upwind for a >= 0) differences.
  const double D = spec.d / (next.h * next.h);
  const double s = hp / next.h;
  const double inv2 = 1.0 / (dxi * dxi);
  std::vector<double> lower(n + 1, 0.0), diag(n + 1, 1.0), upper(n + 1, 0.0);
  diag[0] = 1.0 + dt * D * 2.0 * spec.N * inv2;
  upper[0] = -dt * D * 2.0 * spec.N * inv2;
  for (int j = 1; j < n; ++j) {
    const double c = (spec.N - 1) / (2.0 * j);
    double lo = D * (1.0 - c) * inv2;
    double di = -2.0 * D * inv2;
    double up = D * (1.0 + c) * inv2;
    const double a = j * dxi * s;
    if (a > 0.0) {
      if (a * dxi <= 2.0 * D * std::max(0.0, 1.0 - c)) {
        lo -= a / (2.0 * dxi);
        up += a / (2.0 * dxi);
      } else {
        di -= a / dxi;
        up += a / dxi;
      }
    }
    lower[j] = -dt * lo;
    diag[j] = 1.0 - dt * di;
    upper[j] = -dt * up;
  }
  solve_tridiagonal(lower, diag, upper, next.u);
  next.u[n] = 0.0;
  for (double& v : next.u)
    if (v < 0.0 && v > -kClip) v = 0.0;
  return next;
}

Simulation::Simulation(ProblemSpec spec, SimulationOptions opts)
    : spec_(std::move(spec)), opts_(std::move(opts)), state_(initial_state(spec_)) {
  const double T = spec_.field.period();
  if (!(spec_.numerics.dt > 0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  steps_per_period_ = std::max(1LL, static_cast<long long>(std::ceil(T / spec_.numerics.dt - 1e-9)));
  dt_ = T / steps_per_period_;
  sample_stride_ = opts_.sample_every > 0
                       ? std::max(1LL, std::llround(opts_.sample_every / dt_))
                       : steps_per_period_;
  record(true);
}

void Simulation::record(bool force_snapshot) {
  traj_.t.push_back(state_.t);
  traj_.h.push_back(state_.h);
  traj_.h_prime.push_back(front_speed(state_, spec_.mu));
  traj_.u_sup.push_back(state_.sup());
  if (opts_.record_snapshots && (force_snapshot || step_count_ % steps_per_period_ == 0))
    traj_.snapshots.push_back({state_.t, state_.h, state_.u});
}

void Simulation::substep(double dt, int depth) {
  try {
    state_ = step_free(state_, spec_, dt);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StepSizeTooLarge && depth < 12) {
      substep(0.5 * dt, depth + 1);
      substep(0.5 * dt, depth + 1);
      return;
    }
    throw Error(e.code(), fmt::format("at t = {}: {}", state_.t, e.detail()));
  }
}

bool Simulation::advance_to(double t_end) {
  if (stopped_) return false;
  const long long target = std::llround(t_end / dt_);
  long long last_recorded = step_count_;
  while (step_count_ < target) {
    substep(dt_, 0);
    ++step_count_;
    state_.t = step_count_ * dt_;
    const bool boundary = step_count_ % steps_per_period_ == 0;
    if (step_count_ % sample_stride_ == 0 || (boundary && opts_.record_snapshots)) {
      if (step_count_ % sample_stride_ == 0) {
        record(false);
        last_recorded = step_count_;
      } else if (opts_.record_snapshots) {
        traj_.snapshots.push_back({state_.t, state_.h, state_.u});
      }
    }
    if (boundary && opts_.stop && opts_.stop(state_)) {
      if (last_recorded != step_count_) record(false);
      stopped_ = true;
      return false;
    }
  }
  if (last_recorded != step_count_) record(false);
  return true;
}

Trajectory simulate(const ProblemSpec& spec, double t_max, double sample_every) {
  SimulationOptions opts;
  opts.sample_every = sample_every;
  Simulation sim(spec, std::move(opts));
  sim.advance_to(t_max);
  return sim.trajectory();
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Spreading: return "Spreading";
    case Verdict::Vanishing: return "Vanishing";
    case Verdict::Undecided: return "Undecided";
  }
  return "?";
}

EigenOracle::EigenOracle(CoefficientField field, double d, int N, EigenOptions opts)
    : field_(std::move(field)), d_(d), N_(N), opts_(std::move(opts)) {}

double EigenOracle::small_radius() const {
  // lambda1(R) >= d j^2 / R^2 - sup q, with j the first Dirichlet zero of the
  // unit ball (lower estimate j >= 2.4 for every N >= 1 except N = 1, pi/2)
  const double z = N_ == 1 ? 1.5707963267948966 : 2.404825557695773;
  const double T = field_.period();
  double q_max = 0.0;
  for (int i = 0; i < 64; ++i)
    for (int k = 0; k <= 64; ++k) q_max = std::max(q_max, field_.growth(T * i / 64, 200.0 * k / 64));
  if (q_max <= 0.0) q_max = 1.0;
  return z * std::sqrt(d_ / (2.0 * q_max));
}

double EigenOracle::lambda1(double R) { return principal_eigenvalue(d_, field_, R, N_, opts_).lambda1; }

double EigenOracle::h_star() {
  std::lock_guard lock(mutex_);
  if (h_star_) return *h_star_;
  const double lo = small_radius();
  HStarResult r = stefan::h_star(d_, field_, N_, lo, 8.0 * lo, 1e-4 * std::max(1.0, lo), opts_);
  h_star_ = r.infinite ? std::numeric_limits<double>::infinity() : r.value;
  return *h_star_;
}

std::optional<Verdict> early_verdict(const FreeBoundaryState& state, double mu, double hs, double tol) {
  if (std::isfinite(hs) && state.h > hs * (1.0 + tol)) return Verdict::Spreading;
  if (state.sup() < kDecayed && front_speed(state, mu) < kDecayed && state.h < hs * (1.0 - tol))
    return Verdict::Vanishing;
  return std::nullopt;
}

Outcome classify_outcome(const Trajectory& traj, const ProblemSpec& spec, EigenOracle& eigen) {
  if (traj.empty()) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  const double tol = spec.numerics.eig_tol;
  Outcome out;
  out.h_final = traj.h.back();
  out.u_sup_final = traj.u_sup.back();
  out.t_decided = traj.t.back();
  const double hs = eigen.h_star();
  out.h_star = hs;
  const double hp = traj.h_prime.back();

  // lambda1 at h_final is cheap below a few multiples of the small radius
  const bool cheap = out.h_final <= 8.0 * eigen.small_radius();
  if (std::isfinite(hs) && out.h_final > hs * (1.0 + tol)) {
    out.verdict = Verdict::Spreading;
    if (cheap) out.lambda1 = eigen.lambda1(out.h_final);
    out.evidence = out.lambda1 ? fmt::format("h = {:.6g} > h* = {:.6g}; lambda1(h) = {:.6g}", out.h_final, hs,
                                             *out.lambda1)
                               : fmt::format("h = {:.6g} > h* = {:.6g}", out.h_final, hs);
    return out;
  }
  const bool near = std::isfinite(hs) ? out.h_final >= hs * (1.0 - tol) : out.h_final > 32.0 * eigen.small_radius();
  if (near) {
    try {
      out.lambda1 = eigen.lambda1(out.h_final);
    } catch (const Error&) {
    }
    if (out.lambda1 && *out.lambda1 <= -tol) {
      out.verdict = Verdict::Spreading;
      out.evidence = fmt::format("lambda1(h = {:.6g}) = {:.6g} <= -{}", out.h_final, *out.lambda1, tol);
      return out;
    }
  }
  const bool below = !std::isfinite(hs) || out.h_final < hs * (1.0 - tol);
  if (out.u_sup_final < kDecayed && hp < kDecayed && below) {
    out.verdict = Verdict::Vanishing;
    out.evidence = fmt::format("sup u = {:.3g}, h' = {:.3g}, h = {:.6g} < h* = {:.6g}", out.u_sup_final, hp,
                               out.h_final, hs);
    return out;
  }
  out.verdict = Verdict::Undecided;
  if (!below)
    out.evidence = fmt::format("h = {:.6g} within {} of h* = {:.6g}", out.h_final, tol, hs);
  else
    out.evidence = fmt::format("sup u = {:.3g} not below {}; h' = {:.3g}; h = {:.6g} < h* = {:.6g}",
                               out.u_sup_final, kDecayed, hp, out.h_final, hs);
  return out;
}

double density_bound(const ProblemSpec& spec, double r_max) {
  const EnvelopeSet env = spec.field.envelopes(r_max);
  const double T = spec.field.period();
  double ratio = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double t = T * i / 64;
    ratio = std::max(ratio, env.alpha.upper(t));
  }
  double beta_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 64; ++i) beta_min = std::min(beta_min, env.beta.lower(T * i / 64));
  ratio /= beta_min;
  double u_sup = 0.0;
  for (int k = 0; k <= 256; ++k) u_sup = std::max(u_sup, spec.u0(spec.h0 * k / 256));
  return std::max(ratio, u_sup);
}

}  // namespace stefan
