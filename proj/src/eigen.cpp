#include "stefan/eigen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace stefan {

namespace {

// Rough first Dirichlet eigenvalue of the unit ball: j_{N/2-1,1}^2. Only used
// to size time steps, so a smooth fit is enough (exact at N = 2, ~1% at N = 3).
double unit_ball_ground_rate(int N) {
  const double z = 2.405 + 0.75 * (N - 2);
  return z * z;
}

struct LinearPropagator {
  // Potential factors exp(dt q) are identical in every period, so they are
  // tabulated once when the table stays below this many entries.
  static constexpr std::size_t kMaxCachedFactors = std::size_t{1} << 23;

  const CoefficientField& field;
  const RadialGrid& grid;
  double d;
  int substeps;
  ImplicitDiffusion diffusion;
  std::vector<double> radii;
  std::vector<double> factors;

  LinearPropagator(const CoefficientField& f, const RadialGrid& g, double dd, int m)
      : field(f), grid(g), d(dd), substeps(m), diffusion(g), radii(g.size()) {
    for (int j = 0; j <= g.n; ++j) radii[j] = g.node(j);
  }

  void tabulate() {
    const std::size_t width = static_cast<std::size_t>(grid.n);
    if (!factors.empty() || width * substeps > kMaxCachedFactors) return;
    factors.resize(width * substeps);
    const double dt = field.period() / substeps;
    for (int s = 0; s < substeps; ++s) {
      const double tm = (s + 0.5) * dt;
      for (int j = 0; j < grid.n; ++j) factors[s * width + j] = std::exp(dt * field.growth(tm, radii[j]));
    }
  }

  // Advances psi over one period; when record is set, stores psi at the
  // phase samples (before the step that starts at that phase).
  void run(std::vector<double>& psi, int phases, std::vector<FieldOnGrid>* record) {
    const double T = field.period();
    const double dt = T / substeps;
    const std::size_t width = static_cast<std::size_t>(grid.n);
    int next_phase = 0;
    for (int s = 0; s < substeps; ++s) {
      while (record && next_phase < phases && s == (next_phase * substeps) / phases) {
        record->push_back({psi, s * dt});
        ++next_phase;
      }
      if (!factors.empty()) {
        const double* row = factors.data() + s * width;
        for (int j = 0; j < grid.n; ++j) psi[j] *= row[j];
      } else {
        const double tm = (s + 0.5) * dt;
        for (int j = 0; j < grid.n; ++j) psi[j] *= std::exp(dt * field.growth(tm, radii[j]));
      }
      psi[grid.n] = 0.0;
      diffusion.solve(dt * d, psi);
    }
  }
};

double sup_norm(std::span<const double> u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace

int eigen_substeps(double d, double R, int N, double T, const EigenOptions& opts) {
  if (opts.substeps > 0) return opts.substeps;
  const double rate = d * unit_ball_ground_rate(N) / (R * R);
  const double dt_max = std::min(opts.dt_cap, opts.time_accuracy / rate);
  const double wanted = std::ceil(T / dt_max);
  return std::max(256, static_cast<int>(std::min(wanted, static_cast<double>(opts.max_substeps))));
}

FieldOnGrid period_map(const FieldOnGrid& psi, double d, const CoefficientField& field,
                       const RadialGrid& grid, int substeps) {
  if (psi.u.size() != grid.size()) throw Error(ErrorCode::InvalidArgument, "psi size mismatch");
  LinearPropagator prop(field, grid, d, std::max(1, substeps));
  FieldOnGrid out{psi.u, psi.t + field.period()};
  prop.run(out.u, 0, nullptr);
  return out;
}

EigenResult principal_eigenvalue(double d, const CoefficientField& field, double R, int N,
                                 const EigenOptions& opts) {
  if (!(R > 0) || !(d > 0)) throw Error(ErrorCode::InvalidArgument, "principal_eigenvalue needs R > 0, d > 0");
  const double T = field.period();
  EigenResult res;
  res.grid = RadialGrid{opts.n, R, N};
  res.substeps = eigen_substeps(d, R, N, T, opts);
  const RadialGrid& grid = res.grid;

  std::vector<double> psi(grid.size());
  if (opts.initial.size() == grid.size() && sup_norm(opts.initial) > 0) {
    psi = opts.initial;
  } else {
    for (int j = 0; j <= grid.n; ++j) {
      const double x = grid.node(j) / R;
      psi[j] = 1.0 - x * x;
    }
  }
  psi.back() = 0.0;
  {
    const double m = sup_norm(psi);
    for (double& v : psi) v = std::max(v, 0.0) / m;
  }

  LinearPropagator prop(field, grid, d, res.substeps);
  prop.tabulate();
  std::vector<double> next(grid.size());
  std::vector<FieldOnGrid> record;
  double rho_prev = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    next = psi;
    record.clear();
    prop.run(next, opts.phases, &record);
    const double rho = sup_norm(next);
    double lowest = 0.0;
    for (double v : next) lowest = std::min(lowest, v);
    if (!(rho > 0.0) || !std::isfinite(rho) || lowest < -1e-12 * rho)
      throw Error(ErrorCode::NonPositiveIterate,
                  fmt::format("iteration {}: rho = {}, min = {}", it, rho, lowest));
    double cauchy = 0.0;
    for (std::size_t j = 0; j < next.size(); ++j) {
      next[j] = std::max(next[j], 0.0) / rho;
      cauchy = std::max(cauchy, std::fabs(next[j] - psi[j]));
    }
    res.iterations = it;
    res.residual = cauchy;
    res.rho = rho;
    const bool converged = it > 1 && std::fabs(rho - rho_prev) <= opts.tol * rho && cauchy <= opts.tol;
    rho_prev = rho;
    if (converged) {
      res.lambda1 = -std::log(rho) / T;
      // phi(t) = exp(lambda1 t) psi(t) is T-periodic
      double top = 0.0;
      for (auto& f : record) {
        const double scale = std::exp(res.lambda1 * f.t);
        for (double& v : f.u) v *= scale;
        top = std::max(top, sup_norm(f.u));
      }
      for (auto& f : record)
        for (double& v : f.u) v /= top;
      res.phi = std::move(record);
      return res;
    }
    psi.swap(next);
  }
  throw Error(ErrorCode::NoConvergence,
              fmt::format("power iteration: {} iterations, residual {}", opts.max_iterations, res.residual));
}

namespace {

// Eigen solves along a monotone search share the previous eigenvector.
struct WarmEigen {
  double d;
  const CoefficientField& field;
  int N;
  EigenOptions opts;
  int evaluations = 0;

  double operator()(double R) {
    EigenResult r = principal_eigenvalue(d, field, R, N, opts);
    ++evaluations;
    if (!r.phi.empty()) opts.initial = r.phi.front().u;
    return r.lambda1;
  }
};

}  // namespace

HStarResult h_star(double d, const CoefficientField& field, int N, double r_lo, double r_hi, double tol,
                   const EigenOptions& opts) {
  if (!(r_lo > 0) || !(r_hi > r_lo)) throw Error(ErrorCode::InvalidArgument, "need 0 < r_lo < r_hi");
  WarmEigen lam{d, field, N, opts};
  HStarResult res;
  const double at_lo = lam(r_lo);
  if (at_lo <= 0.0)
    throw Error(ErrorCode::BracketInvalid, fmt::format("lambda1({}) = {} <= 0: h* below bracket", r_lo, at_lo));
  double hi = r_hi;
  double at_hi = lam(hi);
  if (at_hi > 0.0) {
    hi *= 4.0;
    at_hi = lam(hi);
    if (at_hi > 0.0) {
      res.infinite = true;
      res.lo = r_lo;
      res.hi = hi;
      res.evaluations = lam.evaluations;
      return res;
    }
  }
  double lo = r_lo;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (lam(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  res.lo = lo;
  res.hi = hi;
  res.value = 0.5 * (lo + hi);
  res.evaluations = lam.evaluations;
  return res;
}

DThresholds d_thresholds(const CoefficientField& field, double R, int N, double d_lo, double d_hi,
                         double tol, int scan_points, const EigenOptions& opts) {
  if (!(d_lo > 0) || !(d_hi > d_lo)) throw Error(ErrorCode::InvalidArgument, "need 0 < d_lo < d_hi");
  scan_points = std::max(scan_points, 32);
  DThresholds res;
  EigenOptions o = opts;
  for (int i = 0; i < scan_points; ++i) {
    const double d = d_lo * std::pow(d_hi / d_lo, static_cast<double>(i) / (scan_points - 1));
    EigenResult e = principal_eigenvalue(d, field, R, N, o);
    if (!e.phi.empty()) o.initial = e.phi.front().u;
    res.scan.push_back({d, e.lambda1});
  }
  std::vector<std::size_t> changes;
  for (std::size_t i = 1; i < res.scan.size(); ++i)
    if ((res.scan[i - 1].lambda1 > 0) != (res.scan[i].lambda1 > 0)) changes.push_back(i);
  if (changes.empty())
    throw Error(ErrorCode::NoSignChange,
                fmt::format("lambda1 stays {} on [{}, {}]", res.scan.front().lambda1 > 0 ? "positive" : "nonpositive",
                            d_lo, d_hi));
  res.crossings = static_cast<int>(changes.size());

  auto refine = [&](std::size_t i) {
    double lo = res.scan[i - 1].d, hi = res.scan[i].d;
    const bool lo_positive = res.scan[i - 1].lambda1 > 0;
    EigenOptions w = opts;
    while (hi - lo > tol * (1.0 + lo)) {
      const double mid = std::sqrt(lo * hi);
      EigenResult e = principal_eigenvalue(mid, field, R, N, w);
      if (!e.phi.empty()) w.initial = e.phi.front().u;
      if ((e.lambda1 > 0) == lo_positive)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  res.d_star = refine(changes.front());
  res.d_upper = changes.size() == 1 ? res.d_star : refine(changes.back());
  return res;
}

}  // namespace stefan
