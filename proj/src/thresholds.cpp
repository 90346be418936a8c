#include "stefan/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "stefan/eigen.hpp"
#include "stefan/error.hpp"

namespace stefan {

Decision decide(const ProblemSpec& spec, EigenOracle& eigen, const HorizonPolicy& policy, SimulationOptions so) {
  const double T = spec.field.period();
  const double hs = eigen.h_star();
  const double tol = spec.numerics.eig_tol;
  if (policy.early_stop)
    so.stop = [hs, tol, mu = spec.mu](const FreeBoundaryState& s) { return early_verdict(s, mu, hs, tol).has_value(); };
  Simulation sim(spec, std::move(so));

  const double cap = policy.cap_periods * policy.scale * T;
  double horizon = std::min(cap, policy.initial_periods * policy.scale * T);
  Decision out;
  sim.advance_to(horizon);
  out.outcome = classify_outcome(sim.trajectory(), spec, eigen);
  out.undecided_at_first = out.outcome.verdict == Verdict::Undecided;
  while (out.outcome.verdict == Verdict::Undecided && !sim.stopped() && horizon < cap &&
         out.escalations < policy.max_escalations) {
    horizon = std::min(cap, 2.0 * horizon);
    ++out.escalations;
    sim.advance_to(horizon);
    out.outcome = classify_outcome(sim.trajectory(), spec, eigen);
  }
  out.trajectory = sim.trajectory();
  return out;
}

namespace {

struct Search {
  std::string name;
  std::function<ProblemSpec(double)> make;
  const HorizonPolicy& policy;
  EigenOracle& eigen;
  ThresholdResult res;

  Verdict probe(double x) {
    Decision dec = decide(make(x), eigen, policy);
    ++res.evaluations;
    if (dec.undecided_at_first) ++res.undecided_encounters;
    if (dec.outcome.verdict == Verdict::Undecided)
      throw Error(ErrorCode::TooManyUndecided,
                  fmt::format("{} = {}: still Undecided after {} escalations ({})", name, x, dec.escalations,
                              dec.outcome.evidence));
    return dec.outcome.verdict;
  }

  void run(double lo, double hi, double tol, bool allow_open_top) {
    res.verdict_lo = probe(lo);
    if (res.verdict_lo != Verdict::Vanishing)
      throw Error(ErrorCode::BracketInvalid,
                  fmt::format("{} = {} gives {}, expected Vanishing", name, lo, to_string(res.verdict_lo)));
    try {
      res.verdict_hi = probe(hi);
    } catch (const Error& e) {
      if (!allow_open_top || e.code() != ErrorCode::TooManyUndecided) throw;
      res.verdict_hi = Verdict::Undecided;
    }
    if (res.verdict_hi != Verdict::Spreading) {
      if (allow_open_top) {
        res.lo = res.value = hi;
        res.hi = std::numeric_limits<double>::infinity();
        res.lower_bound_only = true;
        res.evidence = fmt::format("spreading not certified at {} = {}: value is a lower bound", name, hi);
        return;
      }
      throw Error(ErrorCode::BracketInvalid,
                  fmt::format("{} = {} gives {}, expected Spreading", name, hi, to_string(res.verdict_hi)));
    }
    while (hi - lo > tol * (1.0 + 0.5 * (lo + hi))) {
      const double mid = lo > 0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
      if (probe(mid) == Verdict::Spreading)
        hi = mid;
      else
        lo = mid;
    }
    res.lo = lo;
    res.hi = hi;
    res.value = 0.5 * (lo + hi);
    res.evidence = fmt::format("Vanishing at {} = {:.6g}, Spreading at {:.6g}", name, lo, hi);
  }
};

// lambda1 at h0: nonpositive means spreading for every mu and every sigma.
std::optional<ThresholdResult> unconditional_branch(const ProblemSpec& spec, EigenOracle& eigen) {
  const double hs = eigen.h_star();
  double lam;
  if (std::isfinite(hs) && spec.h0 > hs * (1.0 + spec.numerics.eig_tol))
    lam = -std::numeric_limits<double>::infinity();
  else if (!std::isfinite(hs) && spec.h0 <= 32.0 * eigen.small_radius())
    return std::nullopt;
  else
    lam = eigen.lambda1(spec.h0);
  if (lam > 0) return std::nullopt;
  ThresholdResult r;
  r.unconditional = true;
  r.evidence = std::isfinite(lam) ? fmt::format("lambda1(h0) = {:.6g} <= 0 => spreading for all values", lam)
                                  : fmt::format("h0 = {:.6g} > h* = {:.6g} => lambda1(h0) < 0 => spreading for all values",
                                                spec.h0, hs);
  r.verdict_hi = Verdict::Spreading;
  return r;
}

}  // namespace

ThresholdResult mu_star(const ProblemSpec& spec, double mu_lo, double mu_hi, double tol, const HorizonPolicy& policy) {
  if (!(mu_lo > 0) || !(mu_hi > mu_lo)) throw Error(ErrorCode::InvalidArgument, "need 0 < mu_lo < mu_hi");
  EigenOracle eigen(spec.field, spec.d, spec.N);
  if (auto r = unconditional_branch(spec, eigen)) return *r;
  Search s{"mu", [&](double mu) {
             ProblemSpec p = spec;
             p.mu = mu;
             return p;
           },
           policy, eigen, {}};
  s.run(mu_lo, mu_hi, tol, false);
  return s.res;
}

ThresholdResult sigma0(const ProblemSpec& spec, const ProfileFn& zeta, double sigma_lo, double sigma_hi, double tol,
                       const HorizonPolicy& policy) {
  if (!(sigma_lo > 0) || !(sigma_hi > sigma_lo)) throw Error(ErrorCode::InvalidArgument, "need 0 < sigma_lo < sigma_hi");
  if (!zeta) throw Error(ErrorCode::InvalidArgument, "zeta missing");
  EigenOracle eigen(spec.field, spec.d, spec.N);
  if (auto r = unconditional_branch(spec, eigen)) return *r;
  Search s{"sigma", [&](double sigma) {
             ProblemSpec p = spec;
             p.u0 = [zeta, sigma](double r) { return sigma * zeta(r); };
             return p;
           },
           policy, eigen, {}};
  s.run(sigma_lo, sigma_hi, tol, true);
  return s.res;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::SlowDiffusion: return "SlowDiffusion";
    case Regime::FastDiffusion: return "FastDiffusion";
    case Regime::LargeHabitat: return "LargeHabitat";
    case Regime::SmallHabitat: return "SmallHabitat";
  }
  return "?";
}

CriteriaReport criteria_experiment(Regime regime, const ProblemSpec& spec, const HorizonPolicy& policy) {
  CriteriaReport rep;
  rep.regime = regime;
  rep.d = spec.d;
  rep.h0 = spec.h0;
  try {
    const bool diffusion = regime == Regime::SlowDiffusion || regime == Regime::FastDiffusion;
    if (diffusion) {
      DThresholds dt = d_thresholds(spec.field, spec.h0, spec.N, spec.d * 1e-2, spec.d * 1e2);
      rep.d_star = dt.d_star;
      rep.d_upper = dt.d_upper;
      rep.d = regime == Regime::SlowDiffusion ? 0.5 * dt.d_star : 2.0 * dt.d_upper;
    }
    EigenOracle eigen(spec.field, rep.d, spec.N);
    rep.h_star = eigen.h_star();
    if (!diffusion) {
      if (!std::isfinite(rep.h_star)) {
        rep.matches = false;
        rep.note = "h* not found in the search bracket; habitat regimes are undefined";
        return rep;
      }
      rep.h0 = (regime == Regime::LargeHabitat ? 1.2 : 0.5) * rep.h_star;
    }

    ProblemSpec base = spec;
    base.d = rep.d;
    base.h0 = rep.h0;
    ProblemSpec empty = base;
    empty.u0 = [](double) { return 0.0; };
    const double M = density_bound(empty, 4.0 * rep.h0);
    const bool always_spread = regime == Regime::SlowDiffusion || regime == Regime::LargeHabitat;
    struct Plan {
      const char* label;
      double amplitude;
      std::optional<Verdict> expected;
    };
    const Plan plans[] = {
        {"tiny", 1e-3 * M, always_spread ? Verdict::Spreading : Verdict::Vanishing},
        {"medium", M, always_spread ? std::optional(Verdict::Spreading) : std::nullopt},
        {"huge", 30.0 * M, Verdict::Spreading},
    };
    for (const Plan& plan : plans) {
      RegimeRun run{plan.label, plan.amplitude, Verdict::Undecided, plan.expected, {}};
      ProblemSpec p = base;
      p.u0 = cosine_profile(rep.h0, plan.amplitude);
      try {
        Decision dec = decide(p, eigen, policy);
        run.verdict = dec.outcome.verdict;
        run.evidence = dec.outcome.evidence;
      } catch (const Error& e) {
        run.evidence = e.what();
      }
      if (run.expected && *run.expected != run.verdict) rep.matches = false;
      rep.runs.push_back(std::move(run));
    }
  } catch (const Error& e) {
    rep.matches = false;
    rep.note = e.what();
  }
  return rep;
}

}  // namespace stefan
