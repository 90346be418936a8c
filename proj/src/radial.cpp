#include "stefan/radial.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace stefan {

void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs) {
  const std::size_t n = diag.size();
  std::vector<double> cprime(n);
  double pivot = diag[0];
  if (std::fabs(pivot) < 1e-14) throw Error(ErrorCode::SolverSingular, "pivot 0");
  cprime[0] = upper[0] / pivot;
  rhs[0] /= pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * cprime[i - 1];
    if (std::fabs(pivot) < 1e-14) throw Error(ErrorCode::SolverSingular, fmt::format("pivot {}", i));
    cprime[i] = i + 1 < n ? upper[i] / pivot : 0.0;
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cprime[i] * rhs[i + 1];
}

StencilRow laplacian_row(const RadialGrid& grid, int j, OuterBoundary outer) {
  const double inv = 1.0 / (grid.dr() * grid.dr());
  if (j == 0) return {0.0, -2.0 * grid.N * inv, 2.0 * grid.N * inv};
  if (j == grid.n) {
    if (outer == OuterBoundary::Dirichlet) return {0.0, 0.0, 0.0};
    return {2.0 * inv, -2.0 * inv, 0.0};
  }
  const double c = (grid.N - 1) / (2.0 * j);
  return {(1.0 - c) * inv, -2.0 * inv, (1.0 + c) * inv};
}

std::vector<double> radial_laplacian(const RadialGrid& grid, std::span<const double> u,
                                     OuterBoundary outer) {
  std::vector<double> out(grid.size(), 0.0);
  for (int j = 0; j <= grid.n; ++j) {
    StencilRow row = laplacian_row(grid, j, outer);
    double v = row.diag * u[j];
    if (j > 0) v += row.lower * u[j - 1];
    if (j < grid.n) v += row.upper * u[j + 1];
    out[j] = v;
  }
  return out;
}

ImplicitDiffusion::ImplicitDiffusion(RadialGrid grid, OuterBoundary outer)
    : grid_(grid), outer_(outer) {}

void ImplicitDiffusion::factor(double k) {
  const std::size_t m = grid_.size();
  lower_.assign(m, 0.0);
  upper_prime_.assign(m, 0.0);
  inv_pivot_.assign(m, 0.0);
  double prev_cprime = 0.0;
  for (int j = 0; j <= grid_.n; ++j) {
    StencilRow row = laplacian_row(grid_, j, outer_);
    double lo = -k * row.lower, di = 1.0 - k * row.diag, up = -k * row.upper;
    if (j == grid_.n && outer_ == OuterBoundary::Dirichlet) lo = up = 0.0, di = 1.0;
    double pivot = di - (j > 0 ? lo * prev_cprime : 0.0);
    if (std::fabs(pivot) < 1e-14) throw Error(ErrorCode::SolverSingular, fmt::format("pivot {}", j));
    lower_[j] = lo;
    inv_pivot_[j] = 1.0 / pivot;
    prev_cprime = up / pivot;
    upper_prime_[j] = prev_cprime;
  }
  k_ = k;
}

void ImplicitDiffusion::solve(double k, std::span<double> rhs) {
  if (k != k_) factor(k);
  const int n = grid_.n;
  rhs[0] *= inv_pivot_[0];
  for (int j = 1; j <= n; ++j) rhs[j] = (rhs[j] - lower_[j] * rhs[j - 1]) * inv_pivot_[j];
  for (int j = n; j-- > 0;) rhs[j] -= upper_prime_[j] * rhs[j + 1];
}

namespace {

void apply_reaction(std::span<double> u, std::span<const double> radii, const CoefficientField& field,
                    double t, double dt) {
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double r = radii[j];
    const double a = field.alpha(t, r);
    const double factor = 1.0 + dt * (a - field.gamma(t, r) - field.beta(t, r) * u[j]);
    if (dt * a >= 1.0 || factor < 0.0)
      throw Error(ErrorCode::StepSizeTooLarge,
                  fmt::format("dt = {} breaks positivity at r = {} (alpha = {}, factor = {})", dt, r, a,
                              factor));
    u[j] *= factor;
  }
}

std::vector<double> node_radii(const RadialGrid& grid) {
  std::vector<double> r(grid.size());
  for (int j = 0; j <= grid.n; ++j) r[j] = grid.node(j);
  return r;
}

}  // namespace

FieldOnGrid step_reaction_diffusion(const RadialGrid& grid, const FieldOnGrid& u,
                                    const CoefficientField& field, double d, double dt,
                                    OuterBoundary outer) {
  ReactionDiffusionStepper stepper(grid, field, d, outer);
  FieldOnGrid next = u;
  stepper.step(next, dt);
  return next;
}

ReactionDiffusionStepper::ReactionDiffusionStepper(RadialGrid grid, const CoefficientField& field,
                                                   double d, OuterBoundary outer)
    : diffusion_(grid, outer), field_(field), d_(d), outer_(outer), radii_(node_radii(grid)) {}

void ReactionDiffusionStepper::step(FieldOnGrid& u, double dt) {
  apply_reaction(u.u, radii_, field_, u.t, dt);
  if (outer_ == OuterBoundary::Dirichlet) u.u.back() = 0.0;
  diffusion_.solve(dt * d_, u.u);
  u.t += dt;
}

namespace {

double sup_norm(std::span<const double> u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::fabs(v));
  return m;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

AttractorResult periodic_attractor(const RadialGrid& grid, const CoefficientField& field, double d,
                                   std::span<const double> u_init, const AttractorOptions& opts) {
  if (u_init.size() != grid.size()) throw Error(ErrorCode::InvalidArgument, "u_init size mismatch");
  if (sup_norm(u_init) == 0.0) throw Error(ErrorCode::InvalidArgument, "u_init identically zero");

  const double T = field.period();
  const int steps = std::max(1, static_cast<int>(std::ceil(T / opts.dt - 1e-9)));
  const double dt = T / steps;
  const int phases = std::max(1, opts.phases);

  ReactionDiffusionStepper stepper(grid, field, d);
  FieldOnGrid u{std::vector<double>(u_init.begin(), u_init.end()), 0.0};
  u.u.back() = 0.0;

  AttractorResult res;
  std::vector<FieldOnGrid> orbit;
  std::vector<double> previous = u.u;
  for (int k = 1; k <= opts.max_periods; ++k) {
    orbit.clear();
    int next_phase = 0;
    for (int s = 0; s < steps; ++s) {
      if (next_phase < phases && s == (next_phase * steps) / phases) {
        // several phases can coincide when steps < phases
        while (next_phase < phases && s == (next_phase * steps) / phases) {
          orbit.push_back({u.u, u.t});
          ++next_phase;
        }
      }
      stepper.step(u, dt);
    }
    u.t = k * T;  // remove accumulated rounding in the phase
    const double norm = sup_norm(u.u);
    res.periods = k;
    res.residual = sup_diff(u.u, previous);
    if (norm < opts.zero_threshold) {
      res.zero = true;
      return res;
    }
    // a solution still decaying geometrically is not a periodic orbit
    if (res.residual < opts.tol && res.residual < 1e-3 * norm) {
      res.orbit = std::move(orbit);
      for (auto& f : res.orbit) f.t -= (k - 1) * T;
      return res;
    }
    previous = u.u;
  }
  throw Error(ErrorCode::NoConvergence,
              fmt::format("periodic attractor after {} periods, residual {}", opts.max_periods,
                          res.residual));
}

double interpolate(const RadialGrid& grid, std::span<const double> u, double r) {
  if (r <= 0.0) return u[0];
  if (r >= grid.R) return r > grid.R ? 0.0 : u[grid.n];
  const double x = r / grid.dr();
  int j = std::min(static_cast<int>(x), grid.n - 1);
  const double w = x - j;
  return (1.0 - w) * u[j] + w * u[j + 1];
}

double EntireSpaceResult::value(std::size_t phase, double r) const {
  return interpolate(grid, orbit.at(phase).u, r);
}

EntireSpaceResult entire_space_periodic(const CoefficientField& field, double d, int N,
                                        const EntireSpaceOptions& opts) {
  if (opts.R_list.empty() || !std::is_sorted(opts.R_list.begin(), opts.R_list.end()))
    throw Error(ErrorCode::InvalidArgument, "R_list must be nonempty and increasing");
  // half the smallest radius: the Dirichlet layer at R_list[0] is not part of U
  const double core = 0.5 * opts.R_list.front();
  const int core_nodes = static_cast<int>(std::lround(core / opts.dr));

  EntireSpaceResult res;
  std::optional<std::vector<FieldOnGrid>> previous;
  for (double R : opts.R_list) {
    RadialGrid grid{static_cast<int>(std::lround(R / opts.dr)), R, N};
    // start near the logistic bound so the bulk is already close to U
    EnvelopeSet env = field.envelopes(R);
    double top = 0.0;
    for (int i = 0; i < 16; ++i) {
      double t = field.period() * i / 16;
      top = std::max(top, env.alpha.upper(t) / env.beta.lower(t));
    }
    std::vector<double> init(grid.size());
    for (int j = 0; j <= grid.n; ++j) {
      double x = grid.node(j) / R;
      init[j] = top * (1.0 - x * x);
    }
    AttractorResult att = periodic_attractor(grid, field, d, init, opts.attractor);
    res.grid = grid;
    res.R_used = R;
    if (att.zero) {
      res.zero = true;
      res.orbit.clear();
      previous.reset();
      continue;
    }
    if (previous) {
      double diff = 0.0;
      for (std::size_t p = 0; p < att.orbit.size(); ++p)
        for (int j = 0; j <= core_nodes; ++j)
          diff = std::max(diff, std::fabs(att.orbit[p].u[j] - (*previous)[p].u[j]));
      res.differences.push_back(diff);
      res.zero = false;
      res.orbit = att.orbit;
      if (diff < opts.tol) return res;
    } else {
      res.zero = false;
      res.orbit = att.orbit;
    }
    previous = std::move(att.orbit);
  }
  if (res.zero) return res;
  throw Error(ErrorCode::DomainNotLargeEnough,
              fmt::format("core difference still {} at R = {}",
                          res.differences.empty() ? -1.0 : res.differences.back(), res.R_used));
}

}  // namespace stefan
