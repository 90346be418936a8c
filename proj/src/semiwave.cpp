#include "stefan/semiwave.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include <fmt/format.h>

#include "stefan/error.hpp"

namespace stefan {

namespace {

double wrap(double t, double T) {
  double x = std::fmod(t, T);
  if (x < 0) x += T;
  return x;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Periodic piecewise-linear function through values at s T / m, s = 0..m-1.
TimeFn periodic_table(std::vector<double> values, double T) {
  return [values = std::move(values), T](double t) {
    const std::size_t m = values.size();
    const double x = wrap(t, T) / T * static_cast<double>(m);
    std::size_t i = static_cast<std::size_t>(x);
    const double w = x - static_cast<double>(i);
    i %= m;
    return (1.0 - w) * values[i] + w * values[(i + 1) % m];
  };
}

int default_steps(double T, int requested) {
  if (requested > 0) return requested;
  return std::max(200, static_cast<int>(std::ceil(T / 0.005 - 1e-9)));
}

}  // namespace

PeriodicLogisticSolution::PeriodicLogisticSolution(double period, std::vector<double> values,
                                                   std::vector<double> slopes, int iterations)
    : period_(period), values_(std::move(values)), slopes_(std::move(slopes)), iterations_(iterations) {}

double PeriodicLogisticSolution::operator()(double t) const {
  const std::size_t m = values_.size() - 1;
  const double h = period_ / static_cast<double>(m);
  const double x = wrap(t, period_) / h;
  std::size_t i = std::min(static_cast<std::size_t>(x), m - 1);
  const double s = x - static_cast<double>(i);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * values_[i] + (s3 - 2 * s2 + s) * h * slopes_[i] +
         (-2 * s3 + 3 * s2) * values_[i + 1] + (s3 - s2) * h * slopes_[i + 1];
}

PeriodicLogisticSolution periodic_logistic(const TimeFn& a, const TimeFn& b, double T, int steps,
                                           int max_periods) {
  if (!(T > 0) || steps < 16) throw Error(ErrorCode::InvalidArgument, "periodic_logistic needs T > 0, steps >= 16");
  const double h = T / steps;
  // a and b at t_i and at the midpoints, as RK4 needs them
  std::vector<double> at(2 * steps + 1), bt(2 * steps + 1);
  for (int i = 0; i <= 2 * steps; ++i) {
    at[i] = a(0.5 * h * i);
    bt[i] = b(0.5 * h * i);
    if (!(bt[i] > 0)) throw Error(ErrorCode::InvalidArgument, fmt::format("b({}) = {} is not positive", 0.5 * h * i, bt[i]));
  }
  const double mean_a = mean_of(std::span(at).first(2 * steps));
  const double mean_b = mean_of(std::span(bt).first(2 * steps));
  if (!(mean_a > 0))
    throw Error(ErrorCode::NonPositive, fmt::format("mean(a) = {} <= 0: no positive periodic orbit", mean_a));

  auto rhs = [&](int k, double v) { return v * (at[k] - bt[k] * v); };
  auto period = [&](double v, std::vector<double>* out) {
    if (out) out->assign(1, v);
    for (int i = 0; i < steps; ++i) {
      const double k1 = rhs(2 * i, v);
      const double k2 = rhs(2 * i + 1, v + 0.5 * h * k1);
      const double k3 = rhs(2 * i + 1, v + 0.5 * h * k2);
      const double k4 = rhs(2 * i + 2, v + h * k3);
      v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      if (!(v > 0) || !std::isfinite(v))
        throw Error(ErrorCode::NonPositive, fmt::format("orbit reached {} at t = {}", v, (i + 1) * h));
      if (out) out->push_back(v);
    }
    return v;
  };

  double v = mean_a / mean_b;
  for (int it = 1; it <= max_periods; ++it) {
    const double next = period(v, nullptr);
    const bool done = std::fabs(next - v) <= 1e-10 * (1.0 + v);
    v = next;
    if (done) {
      std::vector<double> values;
      period(v, &values);
      values.back() = values.front();
      std::vector<double> slopes(values.size());
      for (int i = 0; i <= steps; ++i) slopes[i] = rhs(2 * (i % steps), values[i]);
      return PeriodicLogisticSolution(T, std::move(values), std::move(slopes), it);
    }
  }
  throw Error(ErrorCode::NoConvergence, fmt::format("periodic logistic: no fixed point after {} periods", max_periods));
}

double SemiWaveProfile::value(std::size_t phase, double r) const {
  const auto& u = orbit.at(phase);
  if (r <= 0.0) return u.front();
  if (r >= L) return u.back();
  const double x = r / dr();
  const int j = std::min(static_cast<int>(x), n - 1);
  const double w = x - j;
  return (1.0 - w) * u[j] + w * u[j + 1];
}

namespace {

// Half-line problem with coefficients tabulated at the step times.
struct HalfLine {
  double d, T, L;
  int n, steps;
  std::vector<double> a, b, V;  // V has steps + 1 entries
  double tol;
  int max_periods;

  HalfLine(const TimeFn& fa, const TimeFn& fb, double dd, double period, const SemiWaveOptions& o)
      : d(dd), T(period), L(o.L > 0 ? o.L : 50.0 * std::sqrt(dd)), n(o.n), steps(default_steps(period, o.steps)),
        tol(o.tol), max_periods(o.max_periods) {
    if (n < 16) throw Error(ErrorCode::InvalidArgument, "semi-wave grid needs n >= 16");
    a.resize(steps);
    b.resize(steps);
    for (int s = 0; s < steps; ++s) {
      a[s] = fa(s * T / steps);
      b[s] = fb(s * T / steps);
    }
    PeriodicLogisticSolution sol = periodic_logistic(fa, fb, T, std::max(2048, steps));
    V.resize(steps + 1);
    for (int s = 0; s <= steps; ++s) V[s] = sol(s * T / steps);
  }

  double mean_a() const { return mean_of(a); }

  SemiWaveProfile run(std::span<const double> k, const std::vector<double>* initial) const {
    const double dt = T / steps;
    const double dr = L / n;
    SemiWaveProfile res;
    res.L = L;
    res.n = n;
    res.period = T;

    // one factorisation per step time: rows 1..n-1 of I - dt (d D2 - k D1)
    std::vector<double> lower(static_cast<std::size_t>(steps) * (n + 1)), inv_pivot(lower.size()),
        upper_prime(lower.size());
    for (int s = 0; s < steps; ++s) {
      const double ks = k[s];
      double lo, di, up;
      if (ks * dr <= 2.0 * d) {
        lo = d / (dr * dr) + ks / (2 * dr);
        di = -2.0 * d / (dr * dr);
        up = d / (dr * dr) - ks / (2 * dr);
      } else {
        lo = d / (dr * dr) + ks / dr;
        di = -2.0 * d / (dr * dr) - ks / dr;
        up = d / (dr * dr);
      }
      double* L_ = &lower[static_cast<std::size_t>(s) * (n + 1)];
      double* P_ = &inv_pivot[static_cast<std::size_t>(s) * (n + 1)];
      double* U_ = &upper_prime[static_cast<std::size_t>(s) * (n + 1)];
      L_[0] = 0.0;
      P_[0] = 1.0;
      U_[0] = 0.0;
      for (int j = 1; j <= n; ++j) {
        const bool last = j == n;
        const double l = last ? 0.0 : -dt * lo;
        const double dg = last ? 1.0 : 1.0 - dt * di;
        const double u = last ? 0.0 : -dt * up;
        const double pivot = dg - l * U_[j - 1];
        L_[j] = l;
        P_[j] = 1.0 / pivot;
        U_[j] = u / pivot;
      }
    }

    std::vector<double> u(n + 1);
    if (initial && initial->size() == u.size()) {
      u = *initial;
    } else {
      const double kappa = std::sqrt(std::max(mean_a(), 1e-3) / d);
      for (int j = 0; j <= n; ++j) u[j] = V[0] * std::tanh(0.5 * kappa * j * dr);
    }
    u[0] = 0.0;
    u[n] = V[0];

    auto advance_period = [&](bool record) {
      for (int s = 0; s < steps; ++s) {
        if (record) {
          res.orbit[s] = u;
          res.slope0[s] = (4.0 * u[1] - u[2]) / (2.0 * dr);
        }
        for (int j = 1; j < n; ++j) {
          const double factor = 1.0 + dt * (a[s] - b[s] * u[j]);
          if (factor < 0.0)
            throw Error(ErrorCode::StepSizeTooLarge, fmt::format("semi-wave reaction factor {} < 0", factor));
          u[j] *= factor;
        }
        u[0] = 0.0;
        u[n] = V[s + 1];
        const std::size_t off = static_cast<std::size_t>(s) * (n + 1);
        const double* L_ = &lower[off];
        const double* P_ = &inv_pivot[off];
        const double* U_ = &upper_prime[off];
        u[0] *= P_[0];
        for (int j = 1; j <= n; ++j) u[j] = (u[j] - L_[j] * u[j - 1]) * P_[j];
        for (int j = n; j-- > 0;) u[j] -= U_[j] * u[j + 1];
      }
    };

    std::vector<double> start;
    for (int p = 1; p <= max_periods; ++p) {
      start = u;
      advance_period(false);
      double diff = 0.0, top = 0.0;
      for (int j = 0; j <= n; ++j) {
        diff = std::max(diff, std::fabs(u[j] - start[j]));
        top = std::max(top, std::fabs(u[j]));
      }
      res.periods = p;
      res.residual = diff;
      if (diff <= tol * (1.0 + top)) {
        res.orbit.assign(steps, {});
        res.slope0.assign(steps, 0.0);
        advance_period(true);
        for (int s = 0; s < steps; ++s) {
          const double mid = res.value(s, 0.5 * L);
          if (std::fabs(mid - V[s]) > 0.01 * V[s])
            throw Error(ErrorCode::TruncationTooSmall,
                        fmt::format("U(t, L/2) = {} vs V = {} at t = {} (L = {})", mid, V[s], s * dt, L));
        }
        return res;
      }
    }
    throw Error(ErrorCode::NoConvergence,
                fmt::format("semi-wave attractor after {} periods, residual {}", max_periods, res.residual));
  }
};

}  // namespace

SemiWaveProfile semiwave_profile(const TimeFn& k, const TimeFn& a, const TimeFn& b, double d, double T,
                                 const SemiWaveOptions& opts) {
  if (!(d > 0) || !(T > 0)) throw Error(ErrorCode::InvalidArgument, "semi-wave needs d > 0, T > 0");
  HalfLine line(a, b, d, T, opts);
  std::vector<double> ks(line.steps);
  for (int s = 0; s < line.steps; ++s) {
    ks[s] = k(s * T / line.steps);
    if (ks[s] < 0) throw Error(ErrorCode::InvalidArgument, "drift k must be nonnegative");
  }
  const double mk = mean_of(ks);
  if (line.mean_a() <= mk * mk / (4.0 * d)) {
    SemiWaveProfile zero;
    zero.zero = true;
    zero.L = line.L;
    zero.n = line.n;
    zero.period = T;
    return zero;
  }
  return line.run(ks, nullptr);
}

SpeedResult k0_fixed_point(double mu, const TimeFn& a, const TimeFn& b, double d, double T,
                           const SpeedOptions& opts) {
  if (!(mu > 0)) throw Error(ErrorCode::InvalidArgument, "mu must be positive");
  if (!(d > 0) || !(T > 0)) throw Error(ErrorCode::InvalidArgument, "k0 needs d > 0, T > 0");
  HalfLine line(a, b, d, T, opts.profile);
  const double ma = line.mean_a();
  if (!(ma > 0)) throw Error(ErrorCode::NonPositive, fmt::format("mean(a) = {} <= 0", ma));

  SpeedResult res;
  res.bound = 2.0 * std::sqrt(d * ma);
  res.k0.assign(line.steps, 0.0);
  double w = opts.relax;
  double prev_residual = std::numeric_limits<double>::infinity();
  int growth = 0;
  std::vector<double> next(line.steps);
  const std::vector<double>* warm = nullptr;
  for (int m = 1; m <= opts.max_iterations; ++m) {
    const double mk = mean_of(res.k0);
    const bool zero = ma <= mk * mk / (4.0 * d);
    if (!zero) {
      res.profile = line.run(res.k0, warm);
      warm = &res.profile.orbit.front();
    }
    double diff = 0.0, top = 0.0;
    for (int s = 0; s < line.steps; ++s) {
      const double g = zero ? 0.0 : mu * res.profile.slope0[s];
      next[s] = (1.0 - w) * res.k0[s] + w * g;
      diff = std::max(diff, std::fabs(next[s] - res.k0[s]));
      top = std::max(top, std::fabs(next[s]));
    }
    // next becomes k0; copy because warm points into the profile, not k0
    res.k0 = next;
    res.iterations = m;
    res.residual = diff;
    res.relax = w;
    if (diff <= opts.tol * (1.0 + top) && !zero) {
      // profile and slope belong to the previous iterate, which agrees with k0 to tol
      res.c = mean_of(res.k0);
      if (!(res.c > 0.0) || !(res.c < res.bound))
        throw Error(ErrorCode::BoundViolated, fmt::format("c = {} outside (0, {})", res.c, res.bound));
      return res;
    }
    growth = diff > prev_residual ? growth + 1 : 0;
    if (growth >= 2 && w > 1.0 / 64) {
      w *= 0.5;
      growth = 0;
    }
    prev_residual = diff;
  }
  throw Error(ErrorCode::NoConvergence,
              fmt::format("k0 iteration: {} iterations, residual {}, relax {}, mean k {}", opts.max_iterations,
                          res.residual, w, mean_of(res.k0)));
}

EnvelopeSpeeds envelope_speeds(const CoefficientField& field, double mu, double d, const EnvelopeOptions& opts) {
  const double T = field.period();
  const int steps = default_steps(T, opts.speed.profile.steps);
  const double R0 = opts.R_star, R1 = 10.0 * opts.R_star;
  if (!(R0 > 0)) throw Error(ErrorCode::InvalidArgument, "R_star must be positive");
  const int m = std::max(2, opts.r_samples);

  EnvelopeSpeeds res;
  res.eta_upper.resize(steps);
  res.eta_lower.resize(steps);
  res.beta_lower.resize(steps);
  res.beta_upper.resize(steps);
  for (int s = 0; s < steps; ++s) {
    const double t = s * T / steps;
    double gmax = -std::numeric_limits<double>::infinity(), gmin = -gmax;
    double bmax = gmax, bmin = gmin;
    for (int i = 0; i <= m; ++i) {
      const double r = R0 + (R1 - R0) * i / m;
      const double g = field.growth(t, r), bb = field.beta(t, r);
      gmax = std::max(gmax, g);
      gmin = std::min(gmin, g);
      bmax = std::max(bmax, bb);
      bmin = std::min(bmin, bb);
    }
    res.eta_upper[s] = gmax + opts.eps;
    res.eta_lower[s] = gmin - opts.eps;
    res.beta_lower[s] = bmin - opts.eps;
    res.beta_upper[s] = bmax + opts.eps;
    if (!(res.beta_lower[s] > 0))
      throw Error(ErrorCode::HypothesisHFailed, fmt::format("far-field beta_1 - eps = {} at t = {}", res.beta_lower[s], t));
  }
  const double mean_lower = mean_of(res.eta_lower);
  if (!(mean_lower > 0))
    throw Error(ErrorCode::HypothesisHFailed, fmt::format("far-field eta_* has mean {} <= 0", mean_lower));

  SpeedOptions so = opts.speed;
  so.profile.steps = steps;
  auto upper = std::async(std::launch::async, [&] {
    return k0_fixed_point(mu, periodic_table(res.eta_upper, T), periodic_table(res.beta_lower, T), d, T, so);
  });
  res.lower = k0_fixed_point(mu, periodic_table(res.eta_lower, T), periodic_table(res.beta_upper, T), d, T, so);
  res.upper = upper.get();
  res.c_upper = res.upper.c;
  res.c_lower = res.lower.c;
  return res;
}

FrontSpeed measure_front_speed(const Trajectory& traj, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction <= 0.5))
    throw Error(ErrorCode::InvalidArgument, "window_fraction must lie in (0, 0.5]");
  if (traj.size() < 2) throw Error(ErrorCode::NotSpreading, "trajectory too short");
  const double t0 = traj.t.front(), t1 = traj.t.back();
  const double from = t1 - window_fraction * (t1 - t0);
  double st = 0, sh = 0, stt = 0, sth = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.t[i] < from - 1e-12 * (1.0 + std::fabs(from))) continue;
    st += traj.t[i];
    sh += traj.h[i];
    ++count;
  }
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "fewer than two samples in the window");
  const double tm = st / count, hm = sh / count;
  for (std::size_t i = traj.size() - count; i < traj.size(); ++i) {
    stt += (traj.t[i] - tm) * (traj.t[i] - tm);
    sth += (traj.t[i] - tm) * (traj.h[i] - hm);
  }
  FrontSpeed fs;
  fs.slope = sth / stt;
  fs.ratio = t1 > 0 ? traj.h.back() / t1 : 0.0;
  fs.samples = count;
  if (traj.u_sup.back() < 1e-8 || !(fs.slope > 1e-8))
    throw Error(ErrorCode::NotSpreading,
                fmt::format("front slope {} with sup u = {}", fs.slope, traj.u_sup.back()));
  return fs;
}

}  // namespace stefan
