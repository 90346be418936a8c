#include "stefan/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "stefan/eigen.hpp"
#include "stefan/free_boundary.hpp"
#include "stefan/semiwave.hpp"
#include "stefan/thresholds.hpp"

namespace stefan {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

json maybe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Collects output files as <name>.partial; commit() renames them.
class Artifacts {
 public:
  Artifacts(std::filesystem::path dir, const RunConfig& cfg)
      : dir_(std::move(dir)), hash_(config_hash(cfg)), command_(cfg.command), start_(Clock::now()) {
    std::filesystem::create_directories(dir_);
  }

  std::string header() const {
    return fmt::format("# stefanlab {}\n# command {}\n# config_hash {:016x}\n# wall_time_s {:.3f}\n", kToolVersion,
                       command_, hash_, elapsed());
  }

  json meta() const {
    return {{"version", kToolVersion}, {"command", command_}, {"config_hash", fmt::format("{:016x}", hash_)},
            {"wall_time_s", elapsed()}};
  }

  void write(const std::string& name, const std::string& body) {
    const auto path = dir_ / (name + ".partial");
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw Error(ErrorCode::Internal, fmt::format("cannot write {}", path.string()));
    names_.push_back(name);
  }

  void write_csv(const std::string& name, const std::string& extra_header, const std::string& body) {
    write(name, header() + extra_header + body);
  }

  void write_json(const std::string& name, json doc) {
    doc["meta"] = meta();
    write(name, doc.dump(2) + "\n");
  }

  void commit() {
    for (const auto& name : names_) std::filesystem::rename(dir_ / (name + ".partial"), dir_ / name);
    names_.clear();
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  std::filesystem::path dir_;
  std::uint64_t hash_;
  std::string command_;
  Clock::time_point start_;
  std::vector<std::string> names_;
};

template <class F>
void parallel_for(std::size_t count, unsigned jobs, F&& body) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) body(i);
  };
  std::vector<std::jthread> threads;
  for (unsigned k = 1; k < std::min<std::size_t>(jobs, count); ++k) threads.emplace_back(worker);
  worker();
}

EigenOptions eigen_options(const RunConfig& cfg) {
  EigenOptions o;
  o.n = cfg.eig_n;
  o.tol = std::min(cfg.numerics.tol, 1e-6);
  return o;
}

// Horizon in periods for a simulation command, or the threshold default 50 T.
HorizonPolicy make_policy(const RunConfig& cfg, const RunOptions& opts, bool threshold) {
  HorizonPolicy p;
  const double T = cfg.T;
  const double initial = cfg.horizon_periods > 0 ? cfg.horizon_periods
                         : threshold             ? 50.0
                                                 : round_horizon(cfg.numerics.t_max, T) / T;
  p.initial_periods = initial;
  // simulate stops at 8x its horizon; threshold probes may use every escalation
  const double doublings = threshold ? std::ldexp(1.0, p.max_escalations) : 8.0;
  p.cap_periods = cfg.horizon_cap_periods > 0 ? cfg.horizon_cap_periods : doublings * initial;
  p.scale = opts.horizon_scale;
  p.early_stop = threshold;
  return p;
}

ProblemSpec validated(const RunConfig& cfg) {
  ProblemSpec spec = make_problem(cfg);
  if (!spec.u0) spec.u0 = cosine_profile(spec.h0);
  require_valid(spec);
  return spec;
}

std::string trajectory_csv(const Trajectory& tr) {
  std::string body = "t,h,h_prime,u_sup\n";
  for (std::size_t i = 0; i < tr.size(); ++i)
    body += fmt::format("{},{},{},{}\n", real(tr.t[i]), real(tr.h[i]), real(tr.h_prime[i]), real(tr.u_sup[i]));
  return body;
}

std::string snapshots_csv(const Trajectory& tr) {
  std::string body = "t,r,u\n";
  for (const Snapshot& s : tr.snapshots) {
    const std::size_t n = s.u.size() - 1;
    for (std::size_t j = 0; j <= n; ++j)
      body += fmt::format("{},{},{}\n", real(s.t), real(s.h * static_cast<double>(j) / n), real(s.u[j]));
  }
  return body;
}

json outcome_json(const Outcome& o) {
  return {{"verdict", to_string(o.verdict)},
          {"evidence", o.evidence},
          {"t_decided", o.t_decided},
          {"h_final", o.h_final},
          {"u_sup_final", o.u_sup_final},
          {"h_star", maybe(o.h_star)},
          {"lambda1_final", o.lambda1 ? json(*o.lambda1) : json(nullptr)}};
}

int cmd_simulate(const RunConfig& cfg, const RunOptions& opts, Artifacts& out) {
  ProblemSpec spec = validated(cfg);
  EigenOracle eigen(spec.field, spec.d, spec.N, eigen_options(cfg));
  SimulationOptions so;
  so.sample_every = cfg.sample_every;
  so.record_snapshots = true;
  Decision dec = decide(spec, eigen, make_policy(cfg, opts, false), std::move(so));
  const double bound = density_bound(spec, 4.0 * dec.outcome.h_final);
  double sup = 0.0;
  for (double v : dec.trajectory.u_sup) sup = std::max(sup, v);
  const bool bound_ok = sup <= bound + 5.0 * spec.numerics.tol;
  spdlog::info("simulate: {} ({}) after {} escalations", to_string(dec.outcome.verdict), dec.outcome.evidence,
               dec.escalations);
  out.write_csv("trajectory.csv", "", trajectory_csv(dec.trajectory));
  out.write_csv("snapshots.csv", "", snapshots_csv(dec.trajectory));
  json doc = outcome_json(dec.outcome);
  doc["escalations"] = dec.escalations;
  doc["density_bound"] = bound;
  doc["u_sup_max"] = sup;
  doc["bound_ok"] = bound_ok;
  out.write_json("outcome.json", doc);
  if (!bound_ok) {
    spdlog::error("sup u = {} exceeds the a priori bound {}", sup, bound);
    return exit_code_for(ErrorCode::Internal);
  }
  return 0;
}

int cmd_eigen(const RunConfig& cfg, const RunOptions& opts, Artifacts& out) {
  ProblemSpec spec = validated(cfg);
  const EigenOptions eo = eigen_options(cfg);
  std::vector<EigenResult> results(cfg.radii.size());
  std::vector<std::string> failures(cfg.radii.size());
  parallel_for(cfg.radii.size(), opts.jobs, [&](std::size_t i) {
    try {
      results[i] = principal_eigenvalue(spec.d, spec.field, cfg.radii[i], spec.N, eo);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < failures.size(); ++i)
    if (!failures[i].empty()) throw Error(ErrorCode::NoConvergence, fmt::format("R = {}: {}", cfg.radii[i], failures[i]));
  std::string body = "R,lambda1,rho,iterations,residual\n";
  for (std::size_t i = 0; i < results.size(); ++i)
    body += fmt::format("{},{},{},{},{}\n", real(cfg.radii[i]), real(results[i].lambda1), real(results[i].rho),
                        results[i].iterations, real(results[i].residual));
  out.write_csv("eigen_sweep.csv", "", body);
  // lambda1 decreases strictly in R; a violation is a solver failure
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (cfg.radii[i] > cfg.radii[i - 1] && !(results[i].lambda1 < results[i - 1].lambda1)) {
      spdlog::error("lambda1 not decreasing between R = {} and R = {}", cfg.radii[i - 1], cfg.radii[i]);
      return exit_code_for(ErrorCode::Internal);
    }
  }
  return 0;
}

int cmd_hstar(const RunConfig& cfg, const RunOptions&, Artifacts& out) {
  ProblemSpec spec = validated(cfg);
  EigenOracle eigen(spec.field, spec.d, spec.N, eigen_options(cfg));
  const double lo = cfg.hstar_lo.value_or(eigen.small_radius());
  const double hi = cfg.hstar_hi.value_or(8.0 * lo);
  HStarResult r = h_star(spec.d, spec.field, spec.N, lo, hi, cfg.hstar_tol, eigen_options(cfg));
  spdlog::info("h* = {} (bracket [{}, {}], {} eigen solves)", r.infinite ? "inf" : real(r.value), r.lo, r.hi,
               r.evaluations);
  out.write_json("hstar.json", {{"d", spec.d},
                                {"N", spec.N},
                                {"h_star", r.infinite ? json(nullptr) : json(r.value)},
                                {"infinite", r.infinite},
                                {"lo", r.lo},
                                {"hi", r.hi},
                                {"evaluations", r.evaluations}});
  return 0;
}

int cmd_speed(const RunConfig& cfg, const RunOptions&, Artifacts& out) {
  ProblemSpec spec = validated(cfg);
  EnvelopeOptions eo;
  eo.eps = cfg.speed_eps;
  eo.R_star = cfg.R_star;
  eo.speed.profile.n = cfg.speed_n;
  EnvelopeSpeeds env = envelope_speeds(spec.field, spec.mu, spec.d, eo);
  json doc = {{"mu", spec.mu},
              {"c", 0.5 * (env.c_upper + env.c_lower)},
              {"c_upper", env.c_upper},
              {"c_lower", env.c_lower},
              {"measured_slope", nullptr},
              {"bound_2sqrt_da", env.upper.bound},
              {"iterations", std::max(env.upper.iterations, env.lower.iterations)}};
  const double t_max = round_horizon(cfg.speed_t_max.value_or(cfg.numerics.t_max), cfg.T);
  Trajectory tr = simulate(spec, t_max, cfg.sample_every);
  try {
    FrontSpeed fs = measure_front_speed(tr, cfg.speed_window);
    doc["measured_slope"] = fs.slope;
    doc["h_over_t"] = fs.ratio;
  } catch (const Error&) {
    out.write_json("speed.json", doc);
    throw;
  }
  out.write_json("speed.json", doc);
  out.write_csv("trajectory.csv", "", trajectory_csv(tr));
  return 0;
}

std::string threshold_csv(std::string_view parameter, const ThresholdResult& r) {
  return fmt::format("parameter,value,lo,hi,evaluations,undecided_encounters\n{},{},{},{},{},{}\n", parameter,
                     real(r.value), real(r.lo), real(r.hi), r.evaluations, r.undecided_encounters);
}

int cmd_threshold(const RunConfig& cfg, const RunOptions& opts, Artifacts& out) {
  ProblemSpec spec = validated(cfg);
  const HorizonPolicy policy = make_policy(cfg, opts, true);
  const bool mu = cfg.command == "mu-star";
  ThresholdResult r = mu ? mu_star(spec, *cfg.lo, *cfg.hi, cfg.threshold_tol, policy)
                         : sigma0(spec, spec.u0, *cfg.lo, *cfg.hi, cfg.threshold_tol, policy);
  spdlog::info("{} = {} ({})", mu ? "mu*" : "sigma0", r.value, r.evidence);
  out.write_csv("threshold.csv", fmt::format("# evidence {}\n", r.evidence), threshold_csv(mu ? "mu" : "sigma", r));
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const RunOptions& opts, Artifacts& out) {
  if (cfg.axis1 == cfg.axis2) throw Error(ErrorCode::InvalidArgument, "sweep axes must differ");
  ProblemSpec base = validated(cfg);
  const HorizonPolicy policy = make_policy(cfg, opts, true);

  struct Cell {
    double x, y;
    std::string verdict = "Error";
    double t_decided = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Cell> cells;
  for (double x : cfg.axis1_values)
    for (double y : cfg.axis2_values) cells.push_back({x, y});

  auto cell_config = [&](const Cell& c) {
    RunConfig k = cfg;
    double sigma = 1.0;
    for (auto [axis, v] : {std::pair{cfg.axis1, c.x}, std::pair{cfg.axis2, c.y}}) {
      if (axis == "d") k.d = v;
      else if (axis == "mu") k.mu = v;
      else if (axis == "h0") k.h0 = v;
      else sigma = v;
    }
    return std::pair{k, sigma};
  };
  // one oracle per distinct d, h* computed before the workers start
  std::map<double, std::unique_ptr<EigenOracle>> oracles;
  for (const Cell& c : cells) {
    const double d = cell_config(c).first.d;
    if (!oracles.contains(d)) {
      auto o = std::make_unique<EigenOracle>(base.field, d, base.N, eigen_options(cfg));
      o->h_star();
      oracles.emplace(d, std::move(o));
    }
  }
  parallel_for(cells.size(), opts.jobs, [&](std::size_t i) {
    Cell& c = cells[i];
    try {
      auto [k, sigma] = cell_config(c);
      ProblemSpec spec = make_problem(k);
      spec.u0 = [u = spec.u0, sigma](double r) { return sigma * u(r); };
      Decision dec = decide(spec, *oracles.at(k.d), policy);
      c.verdict = std::string(to_string(dec.outcome.verdict));
      c.t_decided = dec.outcome.t_decided;
    } catch (const std::exception& e) {
      spdlog::warn("sweep cell ({}, {}): {}", c.x, c.y, e.what());
    }
  });

  std::string body = "axis1,axis2,verdict,t_decided\n";
  for (const Cell& c : cells)
    body += fmt::format("{},{},{},{}\n", real(c.x), real(c.y), c.verdict, std::isnan(c.t_decided) ? "" : real(c.t_decided));
  out.write_csv("phase.csv", fmt::format("# axis1 {}\n# axis2 {}\n", cfg.axis1, cfg.axis2), body);

  json overlay = {{"axis1", cfg.axis1}, {"axis2", cfg.axis2}};
  if (auto it = oracles.find(base.d); it != oracles.end()) {
    overlay["h_star"] = maybe(it->second->h_star());
  } else {
    EigenOracle at_base(base.field, base.d, base.N, eigen_options(cfg));
    overlay["h_star"] = maybe(at_base.h_star());
  }
  try {
    DThresholds dt = d_thresholds(base.field, base.h0, base.N, base.d * 1e-2, base.d * 1e2, 1e-4, 32, eigen_options(cfg));
    overlay["d_star"] = dt.d_star;
    overlay["d_upper"] = dt.d_upper;
  } catch (const Error& e) {
    spdlog::info("no d thresholds at R = h0: {}", e.what());
    overlay["d_star"] = nullptr;
    overlay["d_upper"] = nullptr;
  }
  out.write_json("overlay.json", overlay);
  return 0;
}

int cmd_criteria(const RunConfig& cfg, const RunOptions& opts, Artifacts& out) {
  ProblemSpec spec = validated(cfg);
  const HorizonPolicy policy = make_policy(cfg, opts, true);
  std::vector<Regime> regimes;
  for (Regime r : {Regime::SlowDiffusion, Regime::FastDiffusion, Regime::LargeHabitat, Regime::SmallHabitat})
    if (cfg.regime == "all" || cfg.regime == to_string(r)) regimes.push_back(r);
  std::vector<CriteriaReport> reports(regimes.size());
  parallel_for(regimes.size(), opts.jobs, [&](std::size_t i) { reports[i] = criteria_experiment(regimes[i], spec, policy); });
  json doc = json::array();
  for (const CriteriaReport& r : reports) {
    json runs = json::array();
    for (const RegimeRun& run : r.runs)
      runs.push_back({{"label", run.label},
                      {"amplitude", run.amplitude},
                      {"verdict", to_string(run.verdict)},
                      {"expected", run.expected ? json(to_string(*run.expected)) : json(nullptr)},
                      {"evidence", run.evidence}});
    doc.push_back({{"regime", to_string(r.regime)},
                   {"d", r.d},
                   {"h0", r.h0},
                   {"h_star", maybe(r.h_star)},
                   {"d_star", r.d_star},
                   {"d_upper", r.d_upper},
                   {"matches", r.matches},
                   {"note", r.note},
                   {"runs", runs}});
    spdlog::info("{}: {}", to_string(r.regime), r.matches ? "matches prediction" : "MISMATCH");
  }
  out.write_json("criteria.json", {{"reports", doc}});
  return 0;
}

}  // namespace

int run(const RunConfig& config, const RunOptions& options) {
  RunOptions opts = options;
  if (opts.jobs == 0) opts.jobs = std::max(1u, std::thread::hardware_concurrency());
  try {
    Artifacts out(opts.out_dir, config);
    int code = 0;
    const std::string& c = config.command;
    if (c == "simulate") code = cmd_simulate(config, opts, out);
    else if (c == "eigen") code = cmd_eigen(config, opts, out);
    else if (c == "hstar") code = cmd_hstar(config, opts, out);
    else if (c == "speed") code = cmd_speed(config, opts, out);
    else if (c == "mu-star" || c == "sigma0") code = cmd_threshold(config, opts, out);
    else if (c == "sweep") code = cmd_sweep(config, opts, out);
    else if (c == "criteria") code = cmd_criteria(config, opts, out);
    else throw Error(ErrorCode::InvalidArgument, fmt::format("unknown command '{}'", c));
    if (code == 0) out.commit();
    return code;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return exit_code_for(ErrorCode::Internal);
  }
}

}  // namespace stefan
