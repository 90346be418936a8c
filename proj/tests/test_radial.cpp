#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stefan/radial.hpp"

using namespace stefan;
using oracle::pi;

namespace {

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

std::vector<double> sample(const RadialGrid& g, double (*f)(double, double), double R) {
  std::vector<double> u(g.size());
  for (int j = 0; j <= g.n; ++j) u[j] = f(g.node(j), R);
  return u;
}

double bump(double r, double R) { return std::cos(pi * r / (2.0 * R)); }

// constant-coefficient reference run on the ball of radius 3
std::vector<double> reference_run(int n, double dt, double t_end) {
  const RadialGrid g{n, 3.0, 2};
  const CoefficientField f = CoefficientField::constant(1.0, 0.0, 1.0);
  FieldOnGrid u{sample(g, bump, 3.0), 0.0};
  ReactionDiffusionStepper stepper(g, f, 1.0);
  const int steps = static_cast<int>(std::lround(t_end / dt));
  for (int s = 0; s < steps; ++s) stepper.step(u, dt);
  return u.u;
}

}  // namespace

TEST_CASE("Laplacian of a constant vanishes") {
  const RadialGrid g{64, 2.0, 3};
  const std::vector<double> u(g.size(), 4.2);
  const auto L = radial_laplacian(g, u, OuterBoundary::Neumann);
  for (double v : L) CHECK(std::fabs(v) < 1e-10);
}

TEST_CASE("Laplacian of r^2 is 2N") {
  for (int N : {2, 3}) {
    const RadialGrid g{50, 1.5, N};
    std::vector<double> u(g.size());
    for (int j = 0; j <= g.n; ++j) u[j] = g.node(j) * g.node(j);
    const auto L = radial_laplacian(g, u);
    for (int j = 0; j < g.n; ++j) CHECK(L[j] == doctest::Approx(2.0 * N).epsilon(1e-9));
  }
}

TEST_CASE("Laplacian of a smooth profile converges at second order") {
  // u = cos(r) in N = 3: Lu = -cos r - 2 sin r / r
  double prev = 0.0;
  for (int n : {32, 64, 128, 256}) {
    const RadialGrid g{n, 2.0, 3};
    std::vector<double> u(g.size());
    for (int j = 0; j <= n; ++j) u[j] = std::cos(g.node(j));
    const auto L = radial_laplacian(g, u);
    double err = 0.0;
    for (int j = 0; j < n; ++j) {
      const double r = g.node(j);
      const double exact = j == 0 ? -3.0 : -std::cos(r) - 2.0 * std::sin(r) / r;
      err = std::max(err, std::fabs(L[j] - exact));
    }
    if (prev > 0) CHECK(prev / err > 3.5);
    prev = err;
  }
}

TEST_CASE("tridiagonal solve against dense elimination") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int n = 40;
  std::vector<double> lo(n), di(n), up(n), b(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = i ? U(rng) : 0.0;
    up[i] = i < n - 1 ? U(rng) : 0.0;
    di[i] = 3.0 + U(rng);
    b[i] = U(rng);
  }
  std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
  for (int i = 0; i < n; ++i) {
    if (i) A[i][i - 1] = lo[i];
    A[i][i] = di[i];
    if (i < n - 1) A[i][i + 1] = up[i];
    A[i][n] = b[i];
  }
  for (int k = 0; k < n; ++k)
    for (int i = k + 1; i < n; ++i) {
      const double m = A[i][k] / A[k][k];
      for (int j = k; j <= n; ++j) A[i][j] -= m * A[k][j];
    }
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = A[i][n];
    for (int j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
    x[i] = s / A[i][i];
  }
  solve_tridiagonal(lo, di, up, b);
  CHECK(sup_diff(b, x) < 1e-13);

  std::vector<double> zero_pivot{0.0, 1.0}, rhs{1.0, 1.0}, l{0.0, 1.0}, u{1.0, 0.0};
  try {
    solve_tridiagonal(l, zero_pivot, u, rhs);
    FAIL("singular system accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SolverSingular);
  }
}

TEST_CASE("zero is an equilibrium") {
  const RadialGrid g{64, 5.0, 2};
  const CoefficientField f = CoefficientField::constant(1.0, 0.2, 1.0);
  FieldOnGrid u{std::vector<double>(g.size(), 0.0), 0.0};
  for (int s = 0; s < 50; ++s) u = step_reaction_diffusion(g, u, f, 1.0, 0.01);
  for (double v : u.u) CHECK(v == 0.0);
}

TEST_CASE("flat data under Neumann conditions follows the scalar explicit reaction") {
  const RadialGrid g{32, 2.0, 2};
  const CoefficientField f = CoefficientField::from_expressions(
      expr::parse("1 + 0.5*sin(2*pi*t)"), expr::parse("0.1"), expr::parse("1.2"), 1.0);
  FieldOnGrid u{std::vector<double>(g.size(), 0.3), 0.0};
  double scalar = 0.3;
  const double dt = 0.01;
  for (int s = 0; s < 100; ++s) {
    const double t = s * dt;
    const double expected = scalar + dt * scalar * (f.growth(t, 0.0) - f.beta(t, 0.0) * scalar);
    u = step_reaction_diffusion(g, u, f, 1.0, dt, OuterBoundary::Neumann);
    for (double v : u.u) CHECK(std::fabs(v - expected) < 1e-10);
    scalar = expected;
  }
}

TEST_CASE("logistic limit on a large ball") {
  const RadialGrid g{200, 10.0, 2};
  const CoefficientField f = CoefficientField::constant(1.0, 0.0, 1.0);
  FieldOnGrid u{std::vector<double>(g.size()), 0.0};
  for (int j = 0; j <= g.n; ++j) u.u[j] = 0.5 * std::exp(-g.node(j) * g.node(j));
  ReactionDiffusionStepper stepper(g, f, 1.0);
  for (int s = 0; s < 5000; ++s) stepper.step(u, 0.01);
  CHECK(std::fabs(interpolate(g, u.u, 5.0) - 1.0) < 0.02);
}

TEST_CASE("step size guard") {
  const RadialGrid g{16, 1.0, 2};
  const CoefficientField f = CoefficientField::constant(4.0, 0.0, 1.0);
  FieldOnGrid u{sample(g, bump, 1.0), 0.0};
  try {
    step_reaction_diffusion(g, u, f, 1.0, 0.3);
    FAIL("dt * alpha >= 1 accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepSizeTooLarge);
  }
}

TEST_CASE("nonnegativity, a priori bound and comparison on random data") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const RadialGrid g{48, 4.0, 3};
  const CoefficientField f = CoefficientField::from_expressions(
      expr::parse("1.2 + 0.6*sin(2*pi*t)*cos(r)"), expr::parse("0.3"), expr::parse("0.8 + 0.4*cos(2*pi*t)"), 1.0);
  const double alpha2 = 1.8, beta1 = 0.4;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(g.size()), b(g.size());
    for (int j = 0; j < g.n; ++j) {
      a[j] = 3.0 * U(rng);
      b[j] = a[j] + U(rng);
    }
    FieldOnGrid ua{a, 0.0}, ub{b, 0.0};
    double sup0 = 0.0;
    for (double v : b) sup0 = std::max(sup0, v);
    const double M = std::max(alpha2 / beta1, sup0);
    ReactionDiffusionStepper sa(g, f, 0.5), sb(g, f, 0.5);
    for (int s = 0; s < 300; ++s) {
      sa.step(ua, 0.01);
      sb.step(ub, 0.01);
      for (std::size_t j = 0; j < g.size(); ++j) {
        REQUIRE(ua.u[j] >= 0.0);
        REQUIRE(ub.u[j] <= M + 5e-6);
        REQUIRE(ua.u[j] <= ub.u[j] + 1e-9);
      }
    }
  }
}

TEST_CASE("spatial refinement converges at second order") {
  const double dt = 1e-3, t_end = 0.5;
  const std::vector<double> ref = reference_run(4096, dt, t_end);
  double prev = 0.0;
  for (int n : {64, 128, 256, 512}) {
    const std::vector<double> u = reference_run(n, dt, t_end);
    double err = 0.0;
    for (int k = 0; k <= 64; ++k) err = std::max(err, std::fabs(u[k * n / 64] - ref[k * 4096 / 64]));
    if (prev > 0) CHECK(prev / err >= 3.5);
    prev = err;
  }
}

TEST_CASE("temporal refinement converges at first order") {
  const double t_end = 0.5;
  const std::vector<double> ref = reference_run(128, 0.04 / 256, t_end);
  double prev = 0.0;
  for (double dt : {0.04, 0.02, 0.01, 0.005}) {
    const double err = sup_diff(reference_run(128, dt, t_end), ref);
    if (prev > 0) CHECK(prev / err >= 1.9);
    prev = err;
  }
}

TEST_CASE("periodic attractor: extinction on a small ball") {
  const RadialGrid g{64, 1.0, 2};  // h* = 2.405 for these constants
  const CoefficientField f = CoefficientField::constant(1.0, 0.0, 1.0);
  const auto init = sample(g, bump, 1.0);
  const AttractorResult res = periodic_attractor(g, f, 1.0, init);
  CHECK(res.zero);
}

TEST_CASE("periodic attractor: unique positive orbit on a large ball") {
  const RadialGrid g{96, 6.0, 2};
  const CoefficientField f = CoefficientField::from_expressions(
      expr::parse("1 + 0.5*sin(2*pi*t)"), expr::parse("0"), expr::parse("1"), 1.0);
  AttractorOptions opts;
  opts.tol = 1e-8;
  const auto a = sample(g, bump, 6.0);
  std::vector<double> b(g.size());
  for (int j = 0; j <= g.n; ++j) b[j] = 3.0 * (1.0 - std::pow(g.node(j) / 6.0, 2));
  const AttractorResult ra = periodic_attractor(g, f, 1.0, a, opts);
  const AttractorResult rb = periodic_attractor(g, f, 1.0, b, opts);
  REQUIRE_FALSE(ra.zero);
  REQUIRE_FALSE(rb.zero);
  CHECK(ra.residual < opts.tol);
  REQUIRE(ra.orbit.size() == rb.orbit.size());
  for (std::size_t p = 0; p < ra.orbit.size(); ++p) CHECK(sup_diff(ra.orbit[p].u, rb.orbit[p].u) < 10 * opts.tol);
}

TEST_CASE("entire-space solution for constants is a/b") {
  const CoefficientField f = CoefficientField::constant(1.0, 0.0, 1.0);
  const EntireSpaceResult res = entire_space_periodic(f, 1.0, 2);
  REQUIRE_FALSE(res.zero);
  for (double r : {0.0, 2.5, 5.0, 10.0}) CHECK(std::fabs(res.value(0, r) - 1.0) < 0.01);
}

TEST_CASE("entire-space solution tracks the periodic logistic orbit") {
  const CoefficientField f = CoefficientField::from_expressions(
      expr::parse("1 + 0.5*sin(2*pi*t)"), expr::parse("0"), expr::parse("1"), 1.0);
  auto a = [](double t) { return 1.0 + 0.5 * std::sin(2 * pi * t); };
  auto b = [](double) { return 1.0; };
  const EntireSpaceResult res = entire_space_periodic(f, 1.0, 2);
  REQUIRE_FALSE(res.zero);
  for (std::size_t p = 0; p < res.orbit.size(); ++p) {
    const double t = res.orbit[p].t;
    const double v0 = oracle::periodic_logistic_v0(a, b, 1.0, 4000);
    const double v = oracle::logistic_rk4(v0, 0.0, t, 4000, a, b);
    CHECK(std::fabs(res.value(p, 3.0) - v) < 0.02 * v);
  }
}

TEST_CASE("entire-space solution without a positive far field") {
  const CoefficientField f = CoefficientField::from_expressions(
      expr::parse("0.5 + 1.5*exp(-r*r/4)"), expr::parse("1.5"), expr::parse("1"), 1.0);
  EntireSpaceOptions opts;
  opts.R_list = {10.0, 20.0};
  opts.dr = 0.1;
  try {
    const EntireSpaceResult res = entire_space_periodic(f, 1.0, 2, opts);
    CHECK(res.zero);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainNotLargeEnough);
  }
}
