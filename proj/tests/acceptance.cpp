// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status
// is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "oracles.hpp"
#include "stefan/config.hpp"
#include "stefan/eigen.hpp"
#include "stefan/free_boundary.hpp"
#include "stefan/radial.hpp"
#include "stefan/runner.hpp"
#include "stefan/semiwave.hpp"
#include "stefan/thresholds.hpp"

using namespace stefan;
using oracle::pi;
namespace fs = std::filesystem;

namespace {

const double j01 = oracle::bessel_zero(0.0);

// Tolerances, pinned.
constexpr double kEigenRel = 1e-3;
constexpr double kEigenSeconds = 10.0;
constexpr double kShiftAbs = 1e-8;
constexpr double kTimeMeanAbs = 1e-3;
constexpr double kHStarAbs1 = 1e-3;
constexpr double kHStarAbs4 = 2e-3;
constexpr double kDichotomySeconds = 60.0;
constexpr double kVanishFactor = 1.05;
constexpr double kSnapshotRel = 0.02;
constexpr int kSnapshotFrom = 100;
constexpr double kSpeedRel = 0.05;
constexpr double kSpeedSeconds = 300.0;
constexpr double kSandwich = 0.05;
constexpr double kSharpness = 0.05;
constexpr int kPairs = 50;
constexpr double kOrderSlack = 1e-6;
constexpr double kBoundTolUnits = 5.0;
constexpr double kSpaceFactor = 3.5;
constexpr double kTimeFactor = 1.9;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  fmt::print("{} {:>2} {}: {}\n", ok ? "PASS" : "FAIL", id, name, detail);
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Every simulated trajectory is kept for the a priori bound check.
struct BoundRecord {
  std::string label;
  double u_sup_max = 0.0;
  double bound = 0.0;
};
std::vector<BoundRecord> bound_records;

void track(const std::string& label, const ProblemSpec& s, const Trajectory& tr) {
  double h_max = 0.0, u_max = 0.0;
  for (double h : tr.h) h_max = std::max(h_max, h);
  for (double u : tr.u_sup) u_max = std::max(u_max, u);
  bound_records.push_back({label, u_max, density_bound(s, h_max) + kBoundTolUnits * s.numerics.tol});
}

ProblemSpec favorable(double h0, double mu, double amplitude = 1.0) {
  ProblemSpec s;
  s.field = CoefficientField::constant(1.0, 0.0, 1.0);
  s.N = 2;
  s.d = 1.0;
  s.mu = mu;
  s.h0 = h0;
  s.u0 = cosine_profile(h0, amplitude);
  return s;
}

CoefficientField growth_field(const char* growth) {
  return CoefficientField::from_expressions(expr::parse(growth), expr::parse("0"), expr::parse("1"), 1.0);
}

template <class F>
void guarded(int id, const std::string& name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, fmt::format("exception: {}", e.what()));
  }
}

void eigen_closed_form() {
  EigenOptions o;
  o.n = 512;
  const CoefficientField f = CoefficientField::constant(1.0, 0.0, 3.0);
  const auto t0 = std::chrono::steady_clock::now();
  const double l1 = principal_eigenvalue(1.0, f, 1.0, 2, o).lambda1;
  const double l2 = principal_eigenvalue(1.0, f, 2.0, 2, o).lambda1;
  const double secs = seconds_since(t0);
  const double e1 = std::fabs(l1 / (j01 * j01 - 1.0) - 1.0);
  const double e2 = std::fabs(l2 / (j01 * j01 / 4.0 - 1.0) - 1.0);
  report(1, "eigenvalue closed form", e1 < kEigenRel && e2 < kEigenRel && secs < kEigenSeconds,
         fmt::format("R=1 {:.6f} (rel {:.1e}), R=2 {:.6f} (rel {:.1e}), {:.1f} s", l1, e1, l2, e2, secs));
}

void shift_identity() {
  const CoefficientField f = growth_field("0.5 + cos(r)*(1 + 0.5*sin(2*pi*t)) - 0.3*exp(-r*r)");
  const double base = principal_eigenvalue(0.8, f, 2.5, 2).lambda1;
  double worst = 0.0;
  for (double c : {-1.0, 0.3, 2.0})
    worst = std::max(worst, std::fabs(principal_eigenvalue(0.8, f.shifted_growth(c), 2.5, 2).lambda1 - (base - c)));
  report(2, "shift identity", worst < kShiftAbs, fmt::format("max deviation {:.2e}", worst));
}

void time_mean() {
  const double flat = principal_eigenvalue(1.0, growth_field("1"), 2.0, 2).lambda1;
  const double wavy = principal_eigenvalue(1.0, growth_field("1 + sin(2*pi*t)"), 2.0, 2).lambda1;
  const double closed = j01 * j01 / 4.0 - 1.0;
  const double diff = std::fabs(wavy - flat);
  report(3, "time-mean reduction", diff < kTimeMeanAbs && std::fabs(flat / closed - 1.0) < kEigenRel,
         fmt::format("|wavy - flat| = {:.2e}, flat {:.6f} vs {:.6f}", diff, flat, closed));
}

void monotonicity() {
  EigenOptions o;
  o.n = 256;
  const CoefficientField f = growth_field("0.8 + 0.5*exp(-r)*sin(2*pi*t) - 0.4*exp(-r*r)");
  int violations = 0;
  double prev = INFINITY;
  for (int k = 0; k < 10; ++k) {
    const double lam = principal_eigenvalue(1.0, f, 0.8 + 0.5 * k, 2, o).lambda1;
    if (!(lam < prev)) ++violations;
    prev = lam;
  }
  prev = INFINITY;
  const std::string names[] = {"eps"};
  for (double eps : {0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4}) {
    const CoefficientField g = CoefficientField::from_expressions(
        expr::parse("0.3 + 0.2*sin(2*pi*t) + eps*exp(-4*r*r)", names), expr::parse("0"), expr::parse("1"), 1.0,
        {{"eps", eps}});
    const double lam = principal_eigenvalue(1.0, g, 2.0, 2, o).lambda1;
    if (!(lam < prev)) ++violations;
    prev = lam;
  }
  report(4, "monotonicity ladders", violations == 0, fmt::format("{} violations over 20 rungs", violations));
}

void hstar_closed_form() {
  const CoefficientField f = CoefficientField::constant(1.0, 0.0, 1.0);
  const HStarResult a = h_star(1.0, f, 2, 1.0, 8.0, 1e-5);
  const HStarResult b = h_star(4.0, f, 2, 1.0, 8.0, 1e-5);
  const bool ok = !a.infinite && !b.infinite && std::fabs(a.value - 2.4048) <= kHStarAbs1 &&
                  std::fabs(b.value - 4.8097) <= kHStarAbs4;
  report(5, "h* closed form", ok, fmt::format("d=1 {:.5f}, d=4 {:.5f}", a.value, b.value));
}

void dichotomy() {
  // (a) spreading from a large habitat
  ProblemSpec a = favorable(3.0, 1.0);
  EigenOracle eig_a(a.field, a.d, a.N);
  auto t0 = std::chrono::steady_clock::now();
  const Decision da = decide(a, eig_a);
  const double sa = seconds_since(t0);
  track("6a", a, da.trajectory);
  const double lam_h0 = eig_a.lambda1(a.h0);
  const bool ok_a = da.outcome.verdict == Verdict::Spreading && lam_h0 < 0.0 && sa < kDichotomySeconds;

  // (b) vanishing from a small habitat with a small seed
  ProblemSpec b = favorable(1.0, 0.01, 0.1);
  EigenOracle eig_b(b.field, b.d, b.N);
  t0 = std::chrono::steady_clock::now();
  const Decision db = decide(b, eig_b);
  const double sb = seconds_since(t0);
  track("6b", b, db.trajectory);
  const double h_star_b = eig_b.h_star();
  const bool ok_b = db.outcome.verdict == Verdict::Vanishing && db.outcome.h_final <= kVanishFactor * h_star_b &&
                    sb < kDichotomySeconds;
  report(6, "spreading-vanishing dichotomy", ok_a && ok_b,
         fmt::format("(a) {} lambda1(h0)={:.4f} {:.1f} s; (b) {} h={:.4f} h*={:.4f} {:.1f} s",
                     to_string(da.outcome.verdict), lam_h0, sa, to_string(db.outcome.verdict), db.outcome.h_final,
                     h_star_b, sb));
}

// the spreading run above continued past 100 periods
void spreading_convergence() {
  const ProblemSpec a = favorable(3.0, 1.0);
  Simulation sim(a, {.sample_every = 0.0, .record_snapshots = true, .stop = {}});
  sim.advance_to(kSnapshotFrom + 10.0);
  track("7", a, sim.trajectory());
  const EntireSpaceResult U = entire_space_periodic(a.field, a.d, a.N);
  double worst = 0.0;
  int checked = 0;
  for (const Snapshot& snap : sim.trajectory().snapshots) {
    if (snap.t < kSnapshotFrom - 1e-9) continue;
    ++checked;
    for (int k = 0; k <= 50; ++k) {
      const double r = 0.1 * k;
      const double u_ref = U.value(0, r);
      worst = std::max(worst, std::fabs(snap.at_radius(r) - u_ref) / u_ref);
    }
  }
  report(7, "spreading convergence to U", !U.zero && checked > 0 && worst < kSnapshotRel,
         fmt::format("{} snapshots, max relative gap {:.2e} on [0, 5]", checked, worst));
}

void speed_cross_check() {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemSpec s = favorable(3.0, 5.0);
  s.numerics.n = 1024;
  const Trajectory tr = simulate(s, 200.0);
  track("8", s, tr);
  const FrontSpeed measured = measure_front_speed(tr);
  const TimeFn one = [](double) { return 1.0; };
  const SpeedResult sp = k0_fixed_point(5.0, one, one, 1.0, 1.0);
  const double secs = seconds_since(t0);
  const double rel = std::fabs(measured.slope / sp.c - 1.0);
  report(8, "speed cross-check", rel < kSpeedRel && sp.c > 0.0 && sp.c < 2.0 && secs < kSpeedSeconds,
         fmt::format("slope {:.5f}, c {:.5f} (rel {:.2e}), {:.0f} s", measured.slope, sp.c, rel, secs));
}

void envelope_sandwich() {
  // birth minus death: 1 + exp(-r) - 0.2 * (smoothed indicator of r < 1)
  ProblemSpec s = favorable(3.0, 2.0);
  s.field = CoefficientField::from_expressions(expr::parse("1 + exp(-r)*(1 + 0.5*sin(2*pi*t))"),
                                               expr::parse("0.1*(1 - tanh(10*(r - 1)))"), expr::parse("1"), 1.0);
  s.numerics.n = 1024;
  const Trajectory tr = simulate(s, 200.0);
  track("9", s, tr);
  const FrontSpeed measured = measure_front_speed(tr);
  const EnvelopeSpeeds env = envelope_speeds(s.field, s.mu, s.d);
  const double lo = env.c_lower * (1.0 - kSandwich), hi = env.c_upper * (1.0 + kSandwich);
  report(9, "envelope sandwich", lo <= measured.slope && measured.slope <= hi,
         fmt::format("slope {:.5f} in [{:.5f}, {:.5f}]", measured.slope, lo, hi));
}

ProblemSpec coarse(ProblemSpec s) {
  s.numerics.n = 96;
  s.numerics.dt = 0.02;
  return s;
}

Verdict verdict_at(const ProblemSpec& s, const HorizonPolicy& p, const std::string& label) {
  EigenOracle eigen(s.field, s.d, s.N);
  const Decision d = decide(s, eigen, p);
  track(label, s, d.trajectory);
  return d.outcome.verdict;
}

void mu_star_sharpness() {
  const ProblemSpec s = coarse(favorable(1.5, 1.0));
  const ThresholdResult r = mu_star(s, 0.05, 20.0, 0.01);
  HorizonPolicy twice;
  twice.initial_periods *= 2.0;
  twice.cap_periods *= 2.0;
  ProblemSpec below = s, above = s;
  below.mu = (1.0 - kSharpness) * r.value;
  above.mu = (1.0 + kSharpness) * r.value;
  const Verdict vb = verdict_at(below, twice, "10 below");
  const Verdict va = verdict_at(above, twice, "10 above");

  const ThresholdResult large = mu_star(coarse(favorable(3.0, 1.0)), 0.01, 10.0);
  ProblemSpec slow = coarse(favorable(1.5, 1.0));
  slow.d = 0.5 * (1.5 * 1.5) / (j01 * j01);
  const ThresholdResult small_d = mu_star(slow, 0.01, 10.0);

  const bool ok = !r.unconditional && r.value > 0.0 && vb == Verdict::Vanishing && va == Verdict::Spreading &&
                  large.unconditional && large.value == 0.0 && small_d.unconditional && small_d.value == 0.0;
  report(10, "mu* sharpness", ok,
         fmt::format("mu*={:.4f}; 0.95 mu* {}, 1.05 mu* {}; h0>=h*: {}; d<=d*: {}", r.value, to_string(vb),
                     to_string(va), large.value, small_d.value));
}

void sigma0_branches() {
  const ThresholdResult zero = sigma0(coarse(favorable(3.0, 1.0)), cosine_profile(3.0), 0.01, 10.0);

  ProblemSpec hostile = coarse(favorable(1.0, 4.0));
  hostile.field = CoefficientField::from_expressions(expr::parse("1"), expr::parse("2*exp(-r*r)"), expr::parse("1"), 1.0);
  const double lam = principal_eigenvalue(hostile.d, hostile.field, hostile.h0, hostile.N).lambda1;
  const ProfileFn zeta = cosine_profile(hostile.h0);
  const ThresholdResult r = sigma0(hostile, zeta, 0.1, 40.0, 0.02);

  bool sorted = true, spread = false;
  std::string ladder;
  for (double f : {0.5, 0.8, 0.9, 1.1, 1.25, 2.0}) {
    ProblemSpec t = hostile;
    t.u0 = [zeta, a = f * r.value](double x) { return a * zeta(x); };
    const Verdict v = verdict_at(t, {}, fmt::format("11 sigma {}", f));
    if (v == Verdict::Undecided || (spread && v != Verdict::Spreading)) sorted = false;
    if (f < 1.0 && v != Verdict::Vanishing) sorted = false;
    spread = spread || v == Verdict::Spreading;
    ladder += fmt::format(" {}", to_string(v).substr(0, 1));
  }
  const bool ok = zero.unconditional && zero.value == 0.0 && lam > 0.0 && !r.lower_bound_only && r.value > 0.0 &&
                  sorted && spread;
  report(11, "sigma0 branches", ok,
         fmt::format("favorable {}, hostile lambda1={:.4f} sigma0={:.4f}, ladder{}", zero.value, lam, r.value, ladder));
}

void comparison_pairs() {
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0;
  double worst = -INFINITY;
  for (int p = 0; p < kPairs; ++p) {
    const double hA = 0.8 + 1.6 * unit(rng);
    const double hB = hA + 0.05 + 0.5 * unit(rng);
    const double aA = 0.1 + 0.9 * unit(rng);
    const double aB = aA * (1.1 + 0.5 * unit(rng));
    const double mu = 0.2 + 3.0 * unit(rng);
    const double k = 0.6 * unit(rng);
    const std::string names[] = {"k"};
    const CoefficientField f = CoefficientField::from_expressions(
        expr::parse("1 + k*sin(2*pi*t)", names), expr::parse("0.3*exp(-r*r)"), expr::parse("1"), 1.0, {{"k", k}});
    ProblemSpec A = favorable(hA, mu, aA), B = favorable(hB, mu, aB);
    A.field = B.field = f;
    A.numerics.n = B.numerics.n = 96;
    A.numerics.dt = B.numerics.dt = 0.01;
    const Trajectory ta = simulate(A, 6.0, 0.25);
    const Trajectory tb = simulate(B, 6.0, 0.25);
    track(fmt::format("12 pair {} A", p), A, ta);
    track(fmt::format("12 pair {} B", p), B, tb);
    if (ta.size() != tb.size() || ta.snapshots.size() != tb.snapshots.size()) {
      ++violations;
      continue;
    }
    for (std::size_t i = 0; i < ta.size(); ++i) {
      worst = std::max({worst, ta.h[i] - tb.h[i], ta.u_sup[i] - tb.u_sup[i]});
      if (ta.h[i] > tb.h[i] + kOrderSlack || ta.u_sup[i] > tb.u_sup[i] + kOrderSlack) ++violations;
    }
    for (std::size_t i = 0; i < ta.snapshots.size(); ++i)
      for (int j = 0; j <= 40; ++j) {
        const double r = ta.snapshots[i].h * j / 40.0;
        const double gap = ta.snapshots[i].at_radius(r) - tb.snapshots[i].at_radius(r);
        worst = std::max(worst, gap);
        if (gap > kOrderSlack) ++violations;
      }
  }
  report(12, "comparison principle", violations == 0,
         fmt::format("{} pairs, {} violations, max(A - B) {:.2e}", kPairs, violations, worst));
}

void bound_check() {
  int breaches = 0;
  std::string first;
  for (const BoundRecord& b : bound_records)
    if (b.u_sup_max > b.bound) {
      if (breaches++ == 0) first = fmt::format(", first: {} ({:.6g} > {:.6g})", b.label, b.u_sup_max, b.bound);
    }
  report(13, "a priori density bound", breaches == 0 && !bound_records.empty(),
         fmt::format("{} runs, {} breaches{}", bound_records.size(), breaches, first));
}

// Constant-coefficient free-boundary run with a fixed step: front and density.
FreeBoundaryState fixed_run(int n, double dt, double t_end) {
  ProblemSpec s = favorable(2.0, 0.4);
  s.numerics.n = n;
  FreeBoundaryState st = initial_state(s);
  const long steps = std::lround(t_end / dt);
  for (long k = 0; k < steps; ++k) st = step_free(st, s, dt);
  return st;
}

double run_error(const FreeBoundaryState& a, const FreeBoundaryState& ref) {
  double e = std::fabs(a.h - ref.h);
  const int na = a.n(), nr = ref.n();
  for (int k = 0; k <= 32; ++k) e = std::max(e, std::fabs(a.u[k * na / 32] - ref.u[k * nr / 32]));
  return e;
}

void convergence_orders() {
  const double t_end = 0.5;
  const FreeBoundaryState ref_space = fixed_run(4096, 1e-4, t_end);
  double prev = 0.0, min_space = INFINITY;
  for (int n : {64, 128, 256, 512}) {
    const double err = run_error(fixed_run(n, 1e-4, t_end), ref_space);
    if (prev > 0.0) min_space = std::min(min_space, prev / err);
    prev = err;
  }
  const FreeBoundaryState ref_time = fixed_run(128, 0.02 / 256, t_end);
  double min_time = INFINITY;
  prev = 0.0;
  for (double dt : {0.02, 0.01, 0.005, 0.0025}) {
    const double err = run_error(fixed_run(128, dt, t_end), ref_time);
    if (prev > 0.0) min_time = std::min(min_time, prev / err);
    prev = err;
  }
  report(14, "convergence orders", min_space >= kSpaceFactor && min_time >= kTimeFactor,
         fmt::format("space factor {:.2f}, time factor {:.2f}", min_space, min_time));
}

std::string csv_body(const fs::path& p) {
  std::ifstream in(p);
  std::string line, body;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') body += line + '\n';
  return body;
}

void determinism() {
  RunConfig c;
  c.command = "simulate";
  c.alpha = "1 + 0.5*sin(2*pi*t)";
  c.gamma = "0.2*exp(-r)";
  c.beta = "1";
  c.N = 2;
  c.d = 1.0;
  c.mu = 1.5;
  c.h0 = 2.0;
  c.u0 = "cos(pi*r/(2*h0))";
  c.numerics.n = 96;
  c.numerics.dt = 0.02;
  c.numerics.t_max = 20.0;
  const fs::path root = fs::temp_directory_path() / "stefan_acceptance_determinism";
  fs::remove_all(root);
  const int e1 = run(c, {.out_dir = root / "a", .jobs = 1, .horizon_scale = 1.0});
  const int e2 = run(c, {.out_dir = root / "b", .jobs = 1, .horizon_scale = 1.0});
  int files = 0, same = 0;
  for (const char* f : {"trajectory.csv", "snapshots.csv"}) {
    ++files;
    const std::string a = csv_body(root / "a" / f), b = csv_body(root / "b" / f);
    if (!a.empty() && a == b) ++same;
  }
  report(15, "determinism", e1 == 0 && e2 == 0 && same == files,
         fmt::format("exit {}/{}, {}/{} CSV bodies identical", e1, e2, same, files));
}

}  // namespace

int main() {
  guarded(1, "eigenvalue closed form", eigen_closed_form);
  guarded(2, "shift identity", shift_identity);
  guarded(3, "time-mean reduction", time_mean);
  guarded(4, "monotonicity ladders", monotonicity);
  guarded(5, "h* closed form", hstar_closed_form);
  guarded(6, "spreading-vanishing dichotomy", dichotomy);
  guarded(7, "spreading convergence to U", spreading_convergence);
  guarded(8, "speed cross-check", speed_cross_check);
  guarded(9, "envelope sandwich", envelope_sandwich);
  guarded(10, "mu* sharpness", mu_star_sharpness);
  guarded(11, "sigma0 branches", sigma0_branches);
  guarded(12, "comparison principle", comparison_pairs);
  guarded(13, "a priori density bound", bound_check);
  guarded(14, "convergence orders", convergence_orders);
  guarded(15, "determinism", determinism);
  fmt::print("{} failed\n", failures);
  return failures == 0 ? 0 : 1;
}
