#pragma once

// Run configuration: line-oriented "key = value" pairs grouped under
// [section] headers; '#' and ';' start comments; values may be quoted.
//
//   [run]       command, seed, out
//   [field]     alpha, gamma, beta (expressions in t, r and params), T
//   [params]    any name = number, visible to every expression
//   [problem]   N, d, mu, h0, u0 (expression in r, h0 and params)
//   [numerics]  n, dt, t_max, tol, eig_tol, eig_n, sample_every,
//               horizon_periods, horizon_cap_periods
//   [eigen]     R (comma list)
//   [hstar]     r_lo, r_hi, tol
//   [speed]     window, eps, R_star, n, t_max
//   [threshold] lo, hi, tol
//   [sweep]     axis1, axis1_values, axis2, axis2_values (axes: d mu h0 sigma)
//   [criteria]  regime (SlowDiffusion FastDiffusion LargeHabitat SmallHabitat all)

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stefan/coeff.hpp"
#include "stefan/error.hpp"

namespace stefan {

struct ConfigIssue {
  ErrorCode code;
  std::string section;
  std::string key;
  std::string message;
  std::optional<std::size_t> offset;  // into the expression, for ExpressionError
};

/// Thrown by load_config / parse_config; carries every issue found, the first
/// one decides code() and what().
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }
  const ConfigIssue& first() const { return issues_.front(); }

 private:
  std::vector<ConfigIssue> issues_;
};

struct RunConfig {
  std::string command;
  std::int64_t seed = 0;
  std::string out;

  std::string alpha, gamma, beta;
  double T = 1.0;
  std::map<std::string, double> params;

  int N = 2;
  double d = 1.0;
  std::optional<double> mu;
  double h0 = 1.0;
  std::string u0;

  Numerics numerics;
  int eig_n = 512;
  double sample_every = 0.0;
  double horizon_periods = 0.0;      // 0: t_max / T
  double horizon_cap_periods = 0.0;  // 0: 8 x horizon (simulate), 32 x (threshold probes)

  std::vector<double> radii;
  std::optional<double> hstar_lo, hstar_hi;
  double hstar_tol = 1e-4;

  double speed_window = 0.25;
  double speed_eps = 0.0;
  double R_star = 10.0;
  int speed_n = 2048;
  std::optional<double> speed_t_max;

  std::optional<double> lo, hi;
  double threshold_tol = 0.01;

  std::string axis1, axis2;
  std::vector<double> axis1_values, axis2_values;

  std::string regime = "all";

  bool operator==(const RunConfig&) const = default;
};

inline constexpr std::size_t kMaxConfigBytes = std::size_t{1} << 20;

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text that parse_config maps back to an equal RunConfig.
std::string print(const RunConfig& config);

/// 64-bit FNV-1a of the canonical text.
std::uint64_t config_hash(const RunConfig& config);

/// Coefficients, profile and numerics as a ProblemSpec (mu defaults to 1
/// when the command does not need it).
ProblemSpec make_problem(const RunConfig& config);

}  // namespace stefan
