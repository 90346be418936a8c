#include "stefan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <variant>

#include <fmt/format.h>

#include "stefan/expr.hpp"

namespace stefan {

namespace {

std::string summarize(const std::vector<ConfigIssue>& issues) {
  if (issues.empty()) return "empty issue list";
  const ConfigIssue& f = issues.front();
  std::string s = fmt::format("[{}] {}: {}", f.section, f.key, f.message);
  if (issues.size() > 1) s += fmt::format(" (+{} more)", issues.size() - 1);
  return s;
}

ErrorCode first_code(const std::vector<ConfigIssue>& issues) {
  return issues.empty() ? ErrorCode::Internal : issues.front().code;
}

enum class Kind { Real, OptReal, Int, Int64, Text, Expr, List, Command, Axis, Regime };

using Ref = std::variant<double*, std::optional<double>*, int*, std::int64_t*, std::string*, std::vector<double>*>;

struct Key {
  std::string_view section;
  std::string_view name;
  Kind kind;
  Ref (*ref)(RunConfig&);
};

#define STEFAN_REF(expr) [](RunConfig& c) -> Ref { return &c.expr; }

const Key kKeys[] = {
    {"run", "command", Kind::Command, STEFAN_REF(command)},
    {"run", "seed", Kind::Int64, STEFAN_REF(seed)},
    {"run", "out", Kind::Text, STEFAN_REF(out)},
    {"field", "alpha", Kind::Expr, STEFAN_REF(alpha)},
    {"field", "gamma", Kind::Expr, STEFAN_REF(gamma)},
    {"field", "beta", Kind::Expr, STEFAN_REF(beta)},
    {"field", "T", Kind::Real, STEFAN_REF(T)},
    {"problem", "N", Kind::Int, STEFAN_REF(N)},
    {"problem", "d", Kind::Real, STEFAN_REF(d)},
    {"problem", "mu", Kind::OptReal, STEFAN_REF(mu)},
    {"problem", "h0", Kind::Real, STEFAN_REF(h0)},
    {"problem", "u0", Kind::Expr, STEFAN_REF(u0)},
    {"numerics", "n", Kind::Int, STEFAN_REF(numerics.n)},
    {"numerics", "dt", Kind::Real, STEFAN_REF(numerics.dt)},
    {"numerics", "t_max", Kind::Real, STEFAN_REF(numerics.t_max)},
    {"numerics", "tol", Kind::Real, STEFAN_REF(numerics.tol)},
    {"numerics", "eig_tol", Kind::Real, STEFAN_REF(numerics.eig_tol)},
    {"numerics", "eig_n", Kind::Int, STEFAN_REF(eig_n)},
    {"numerics", "sample_every", Kind::Real, STEFAN_REF(sample_every)},
    {"numerics", "horizon_periods", Kind::Real, STEFAN_REF(horizon_periods)},
    {"numerics", "horizon_cap_periods", Kind::Real, STEFAN_REF(horizon_cap_periods)},
    {"eigen", "R", Kind::List, STEFAN_REF(radii)},
    {"hstar", "r_lo", Kind::OptReal, STEFAN_REF(hstar_lo)},
    {"hstar", "r_hi", Kind::OptReal, STEFAN_REF(hstar_hi)},
    {"hstar", "tol", Kind::Real, STEFAN_REF(hstar_tol)},
    {"speed", "window", Kind::Real, STEFAN_REF(speed_window)},
    {"speed", "eps", Kind::Real, STEFAN_REF(speed_eps)},
    {"speed", "R_star", Kind::Real, STEFAN_REF(R_star)},
    {"speed", "n", Kind::Int, STEFAN_REF(speed_n)},
    {"speed", "t_max", Kind::OptReal, STEFAN_REF(speed_t_max)},
    {"threshold", "lo", Kind::OptReal, STEFAN_REF(lo)},
    {"threshold", "hi", Kind::OptReal, STEFAN_REF(hi)},
    {"threshold", "tol", Kind::Real, STEFAN_REF(threshold_tol)},
    {"sweep", "axis1", Kind::Axis, STEFAN_REF(axis1)},
    {"sweep", "axis1_values", Kind::List, STEFAN_REF(axis1_values)},
    {"sweep", "axis2", Kind::Axis, STEFAN_REF(axis2)},
    {"sweep", "axis2_values", Kind::List, STEFAN_REF(axis2_values)},
    {"criteria", "regime", Kind::Regime, STEFAN_REF(regime)},
};

#undef STEFAN_REF

constexpr std::string_view kCommands[] = {"simulate", "eigen", "hstar", "speed", "mu-star", "sigma0", "sweep", "criteria"};
constexpr std::string_view kAxes[] = {"d", "mu", "h0", "sigma"};
constexpr std::string_view kRegimes[] = {"SlowDiffusion", "FastDiffusion", "LargeHabitat", "SmallHabitat", "all"};

template <std::size_t M>
bool one_of(std::string_view v, const std::string_view (&set)[M]) {
  return std::find(std::begin(set), std::end(set), v) != std::end(set);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_real(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <class I>
std::optional<I> to_integer(std::string_view s) {
  s = trim(s);
  I v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

struct Requirement {
  std::string_view section, name;
};

std::vector<Requirement> required_for(std::string_view command) {
  std::vector<Requirement> r = {{"field", "alpha"}, {"field", "gamma"}, {"field", "beta"}, {"field", "T"},
                                {"problem", "N"},   {"problem", "d"}};
  const bool profile = command != "eigen" && command != "hstar";
  if (profile) {
    r.push_back({"problem", "h0"});
    r.push_back({"problem", "u0"});
  }
  if (profile && command != "mu-star") r.push_back({"problem", "mu"});
  if (command == "eigen") r.push_back({"eigen", "R"});
  if (command == "mu-star" || command == "sigma0") {
    r.push_back({"threshold", "lo"});
    r.push_back({"threshold", "hi"});
  }
  if (command == "sweep") {
    r.push_back({"sweep", "axis1"});
    r.push_back({"sweep", "axis1_values"});
    r.push_back({"sweep", "axis2"});
    r.push_back({"sweep", "axis2_values"});
  }
  return r;
}

std::vector<std::string> param_names(const RunConfig& c) {
  std::vector<std::string> names;
  for (const auto& [k, v] : c.params) names.push_back(k);
  return names;
}

void check_expression(const std::string& text, std::string_view section, std::string_view key,
                      std::span<const std::string> params, std::vector<ConfigIssue>& issues) {
  try {
    expr::parse(text, params);
  } catch (const expr::ParseError& e) {
    issues.push_back({ErrorCode::ExpressionError, std::string(section), std::string(key), e.detail(), e.offset()});
  } catch (const expr::UnknownIdentifierError& e) {
    issues.push_back({ErrorCode::ExpressionError, std::string(section), std::string(key), e.detail(), e.offset()});
  } catch (const Error& e) {
    issues.push_back({ErrorCode::ExpressionError, std::string(section), std::string(key), e.detail(), std::nullopt});
  }
}

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : Error(first_code(issues), summarize(issues)), issues_(std::move(issues)) {}

RunConfig parse_config(std::string_view text) {
  if (text.size() > kMaxConfigBytes) throw ConfigError({{ErrorCode::InvalidArgument, "", "", "configuration larger than 1 MiB", {}}});
  RunConfig cfg;
  std::vector<ConfigIssue> issues;
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({ErrorCode::SyntaxError, section, "", fmt::format("line {}: unterminated section header", line_no), {}});
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      issues.push_back({ErrorCode::SyntaxError, section, std::string(line), fmt::format("line {}: expected key = value", line_no), {}});
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    } else if (const auto hash = value.find(" #"); hash != std::string_view::npos) {
      value = trim(value.substr(0, hash));
    }
    if (!seen.insert({section, key}).second) {
      issues.push_back({ErrorCode::InvalidArgument, section, key, fmt::format("line {}: duplicate key", line_no), {}});
      continue;
    }

    if (section == "params") {
      if (!is_identifier(key) || key == "t" || key == "r" || key == "pi" || key == "e" || key == "h0") {
        issues.push_back({ErrorCode::InvalidArgument, section, key, "parameter names must be identifiers other than t, r, pi, e, h0", {}});
      } else if (auto v = to_real(value)) {
        cfg.params[key] = *v;
      } else {
        issues.push_back({ErrorCode::TypeMismatch, section, key, fmt::format("'{}' is not a finite number", value), {}});
      }
      continue;
    }
    const Key* def = nullptr;
    for (const Key& k : kKeys)
      if (k.section == section && k.name == key) def = &k;
    if (!def) {
      issues.push_back({ErrorCode::UnknownKey, section, key, fmt::format("line {}: unknown key", line_no), {}});
      continue;
    }
    auto mismatch = [&](std::string_view what) {
      issues.push_back({ErrorCode::TypeMismatch, section, key, fmt::format("'{}' is not {}", value, what), {}});
    };
    Ref ref = def->ref(cfg);
    switch (def->kind) {
      case Kind::Real:
        if (auto v = to_real(value)) *std::get<double*>(ref) = *v; else mismatch("a finite number");
        break;
      case Kind::OptReal:
        if (auto v = to_real(value)) *std::get<std::optional<double>*>(ref) = *v; else mismatch("a finite number");
        break;
      case Kind::Int:
        if (auto v = to_integer<int>(value)) *std::get<int*>(ref) = *v; else mismatch("an integer");
        break;
      case Kind::Int64:
        if (auto v = to_integer<std::int64_t>(value)) *std::get<std::int64_t*>(ref) = *v; else mismatch("an integer");
        break;
      case Kind::Text:
      case Kind::Expr:
        *std::get<std::string*>(ref) = std::string(value);
        break;
      case Kind::Command:
        if (one_of(value, kCommands)) *std::get<std::string*>(ref) = std::string(value); else mismatch("a command");
        break;
      case Kind::Axis:
        if (one_of(value, kAxes)) *std::get<std::string*>(ref) = std::string(value); else mismatch("one of d, mu, h0, sigma");
        break;
      case Kind::Regime:
        if (one_of(value, kRegimes)) *std::get<std::string*>(ref) = std::string(value); else mismatch("a regime");
        break;
      case Kind::List: {
        std::vector<double> out;
        bool ok = !value.empty();
        std::string_view rest = value;
        while (ok && !rest.empty()) {
          const auto comma = rest.find(',');
          auto v = to_real(rest.substr(0, comma));
          if (!v) ok = false; else out.push_back(*v);
          rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
        if (ok) *std::get<std::vector<double>*>(ref) = std::move(out); else mismatch("a comma-separated list of numbers");
        break;
      }
    }
  }

  if (!seen.contains({"run", "command"})) {
    issues.push_back({ErrorCode::MissingKey, "run", "command", "missing key", {}});
  } else {
    for (const Requirement& req : required_for(cfg.command))
      if (!seen.contains({std::string(req.section), std::string(req.name)}))
        issues.push_back({ErrorCode::MissingKey, std::string(req.section), std::string(req.name), "missing key", {}});
  }

  const std::vector<std::string> names = param_names(cfg);
  std::vector<std::string> profile_names = names;
  profile_names.push_back("h0");
  for (auto [key, text_ptr] : {std::pair{"alpha", &cfg.alpha}, {"gamma", &cfg.gamma}, {"beta", &cfg.beta}})
    if (seen.contains({"field", key})) check_expression(*text_ptr, "field", key, names, issues);
  if (seen.contains({"problem", "u0"})) check_expression(cfg.u0, "problem", "u0", profile_names, issues);

  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw ConfigError({{ErrorCode::InvalidArgument, "", "", fmt::format("cannot read {}: {}", path.string(), ec.message()), {}}});
  if (size > kMaxConfigBytes)
    throw ConfigError({{ErrorCode::InvalidArgument, "", "", fmt::format("{} is larger than 1 MiB", path.string()), {}}});
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string print(const RunConfig& config) {
  RunConfig& c = const_cast<RunConfig&>(config);  // Ref accessors are only read here
  std::string out;
  std::string_view section;
  auto open = [&](std::string_view s) {
    if (s == section) return;
    if (!out.empty()) out += '\n';
    out += fmt::format("[{}]\n", s);
    section = s;
  };
  for (const Key& k : kKeys) {
    if (k.section == "problem" && section == "field" && !config.params.empty()) {
      open("params");
      for (const auto& [name, v] : config.params) out += fmt::format("{} = {}\n", name, format_real(v));
    }
    Ref ref = k.ref(c);
    std::optional<std::string> value;
    if (auto* p = std::get_if<double*>(&ref)) value = format_real(**p);
    else if (auto* p = std::get_if<std::optional<double>*>(&ref)) { if (**p) value = format_real(***p); }
    else if (auto* p = std::get_if<int*>(&ref)) value = fmt::format("{}", **p);
    else if (auto* p = std::get_if<std::int64_t*>(&ref)) value = fmt::format("{}", **p);
    else if (auto* p = std::get_if<std::string*>(&ref)) { if (!(*p)->empty()) value = fmt::format("\"{}\"", **p); }
    else if (auto* p = std::get_if<std::vector<double>*>(&ref)) {
      if (!(*p)->empty()) {
        std::vector<std::string> parts;
        for (double v : **p) parts.push_back(format_real(v));
        value = fmt::format("{}", fmt::join(parts, ", "));
      }
    }
    if (!value) continue;
    open(k.section);
    out += fmt::format("{} = {}\n", k.name, *value);
  }
  return out;
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : print(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

ProblemSpec make_problem(const RunConfig& config) {
  expr::ParamMap params(config.params.begin(), config.params.end());
  const std::vector<std::string> names = param_names(config);
  ProblemSpec spec;
  spec.field = CoefficientField::from_expressions(expr::parse(config.alpha, names), expr::parse(config.gamma, names),
                                                  expr::parse(config.beta, names), config.T, params);
  spec.N = config.N;
  spec.d = config.d;
  spec.mu = config.mu.value_or(1.0);
  spec.h0 = config.h0;
  spec.numerics = config.numerics;
  if (!config.u0.empty()) {
    std::vector<std::string> profile_names = names;
    profile_names.push_back("h0");
    expr::ParamMap with_h0 = params;
    with_h0["h0"] = config.h0;
    auto prog = std::make_shared<const expr::Compiled>(expr::parse(config.u0, profile_names), with_h0);
    spec.u0 = [prog](double r) { return (*prog)(0.0, r); };
  }
  return spec;
}

}  // namespace stefan
