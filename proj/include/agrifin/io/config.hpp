#pragma once

// Run configuration: a YAML file with nested sections.
//
//   scenario:   beta, w, sigma_bar, sigma, theta0, c_F, c_S (required),
//               alpha, tau, fixed_cost_basis (optional)
//   solver:     tol, max_outer_iterations, clearing_max_iterations, price_cap,
//               clearing_method, grid_points, truncation, gamma_guesses
//   sweep:      parameter, values | (points, min, max), mode
//   market_b:   sigma_multiplier, target_default
//   output:     directory, formats, threads
//
// Unknown keys anywhere are rejected.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "agrifin/expectation.hpp"
#include "agrifin/model.hpp"
#include "agrifin/sweep.hpp"

namespace agrifin::io {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double tol = 1e-7;
  int max_outer_iterations = 10000;
  int clearing_max_iterations = 200;
  double price_cap = 1e12;
  ClearingMethod clearing_method = ClearingMethod::bracketed;
  GridConfig grid;
  std::vector<double> gamma_guesses{1.0};

  SolverOptions options() const {
    SolverOptions o;
    o.tol = tol;
    o.max_outer_iterations = max_outer_iterations;
    o.clearing.tol = tol;
    o.clearing.max_iterations = clearing_max_iterations;
    o.clearing.price_cap = price_cap;
    o.clearing.method = clearing_method;
    return o;
  }

  bool operator==(const SolverConfig&) const = default;
};

struct SweepConfig {
  SweptParameter parameter = SweptParameter::alpha;
  std::vector<double> values;   // explicit list; overrides points/min/max
  std::size_t points = 60;
  double min = 0.0;
  std::optional<double> max;    // alpha default: feasibility bound
  SweepMode mode = SweepMode::both;

  bool operator==(const SweepConfig&) const = default;
};

struct MarketBConfig {
  double sigma_multiplier = 2.0;
  double target_default = 0.02;

  bool operator==(const MarketBConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
  unsigned threads = 0;  // 0 = auto

  bool wants(const std::string& f) const {
    return std::find(formats.begin(), formats.end(), f) != formats.end();
  }

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  ScenarioParams scenario;
  SolverConfig solver;
  std::optional<SweepConfig> sweep;
  MarketBConfig market_b;
  OutputConfig output;

  bool operator==(const RunConfig&) const = default;
};

// 17 significant digits, trailing zeros dropped; reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.is_null()) return "";
  return " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
}

inline void require_map(const YAML::Node& n, const std::string& path) {
  if (!n.IsMap()) throw ConfigError("config: '" + path + "' must be a mapping" + where(n));
}

inline void reject_unknown(const YAML::Node& n, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) {
      std::string list;
      for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
      throw ConfigError("config: unknown key '" + (path.empty() ? key : path + "." + key) + "'" +
                        where(kv.first) + "; allowed: " + list);
    }
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError("config: '" + key + "' must be a scalar" + where(n));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config: '" + key + "' has an invalid value '" + n.Scalar() + "'" + where(n));
  }
}

template <>
inline double scalar<double>(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError("config: '" + key + "' must be a number" + where(n));
  const std::string& s = n.Scalar();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("config: '" + key + "' is not a number: '" + s + "'" + where(n));
  return v;
}

template <class T>
void optional_field(const YAML::Node& sec, const std::string& path, const char* key, T& out) {
  if (const auto n = sec[key]) out = scalar<T>(n, path + "." + key);
}

inline double required_double(const YAML::Node& sec, const std::string& path, const char* key) {
  const auto n = sec[key];
  if (!n) throw ConfigError("config: missing required key '" + path + "." + key + "'" + where(sec));
  return scalar<double>(n, path + "." + key);
}

inline std::vector<double> double_list(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw ConfigError("config: '" + key + "' must be a list" + where(n));
  std::vector<double> out;
  for (const auto& item : n) out.push_back(scalar<double>(item, key));
  return out;
}

template <class E>
E parse_enum(const YAML::Node& n, const std::string& key,
             std::initializer_list<std::pair<const char*, E>> options) {
  const auto s = scalar<std::string>(n, key);
  for (const auto& [name, value] : options)
    if (s == name) return value;
  std::string list;
  for (const auto& [name, value] : options) list += std::string(list.empty() ? "" : ", ") + name;
  throw ConfigError("config: '" + key + "' must be one of " + list + ", got '" + s + "'" + where(n));
}

inline unsigned parse_threads(const std::string& s, const std::string& key) {
  if (s == "auto") return 0;
  unsigned v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v == 0)
    throw ConfigError("config: '" + key + "' must be a positive integer or 'auto', got '" + s + "'");
  return v;
}

}  // namespace detail

inline SweptParameter parse_swept_parameter(const std::string& s) {
  if (s == "alpha") return SweptParameter::alpha;
  if (s == "beta") return SweptParameter::beta;
  if (s == "sigma_bar") return SweptParameter::sigma_bar;
  if (s == "w") return SweptParameter::w;
  throw ConfigError("sweep parameter must be alpha, beta, sigma_bar or w, got '" + s + "'");
}

inline SweepMode parse_sweep_mode(const std::string& s) {
  if (s == "rational") return SweepMode::rational;
  if (s == "naive") return SweepMode::naive;
  if (s == "both") return SweepMode::both;
  throw ConfigError("mode must be rational, naive or both, got '" + s + "'");
}

inline unsigned parse_threads(const std::string& s) { return detail::parse_threads(s, "threads"); }

inline RunConfig parse_config(const YAML::Node& root) {
  using namespace detail;
  RunConfig cfg;
  if (!root || root.IsNull()) throw ConfigError("config: empty document; 'scenario' is required");
  require_map(root, "<root>");
  reject_unknown(root, "", {"scenario", "solver", "sweep", "market_b", "output"});

  const auto sc = root["scenario"];
  if (!sc) throw ConfigError("config: missing required section 'scenario'");
  require_map(sc, "scenario");
  reject_unknown(sc, "scenario", {"beta", "w", "sigma_bar", "sigma", "theta0", "c_F", "c_S",
                                  "alpha", "tau", "fixed_cost_basis"});
  auto& p = cfg.scenario;
  p.beta = required_double(sc, "scenario", "beta");
  p.w = required_double(sc, "scenario", "w");
  p.sigma_bar = required_double(sc, "scenario", "sigma_bar");
  p.sigma = required_double(sc, "scenario", "sigma");
  p.theta0 = required_double(sc, "scenario", "theta0");
  p.c_F = required_double(sc, "scenario", "c_F");
  p.c_S = required_double(sc, "scenario", "c_S");
  optional_field(sc, "scenario", "alpha", p.alpha);
  optional_field(sc, "scenario", "tau", p.tau);
  if (const auto n = sc["fixed_cost_basis"])
    p.fixed_cost_basis = parse_enum<FixedCostBasis>(
        n, "scenario.fixed_cost_basis",
        {{"investment_units", FixedCostBasis::investment_units},
         {"absolute", FixedCostBasis::absolute}});
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what() + where(sc));
  }

  if (const auto so = root["solver"]) {
    require_map(so, "solver");
    reject_unknown(so, "solver", {"tol", "max_outer_iterations", "clearing_max_iterations",
                                  "price_cap", "clearing_method", "grid_points", "truncation",
                                  "gamma_guesses"});
    auto& s = cfg.solver;
    optional_field(so, "solver", "tol", s.tol);
    optional_field(so, "solver", "max_outer_iterations", s.max_outer_iterations);
    optional_field(so, "solver", "clearing_max_iterations", s.clearing_max_iterations);
    optional_field(so, "solver", "price_cap", s.price_cap);
    optional_field(so, "solver", "grid_points", s.grid.n_points);
    optional_field(so, "solver", "truncation", s.grid.truncation);
    if (const auto n = so["clearing_method"])
      s.clearing_method = parse_enum<ClearingMethod>(
          n, "solver.clearing_method",
          {{"bracketed", ClearingMethod::bracketed}, {"fixed_point", ClearingMethod::fixed_point}});
    if (const auto n = so["gamma_guesses"]) s.gamma_guesses = double_list(n, "solver.gamma_guesses");
    if (!(s.tol > 0.0)) throw ConfigError("config: solver.tol must be positive" + where(so));
    if (s.max_outer_iterations <= 0 || s.clearing_max_iterations <= 0)
      throw ConfigError("config: iteration caps must be positive" + where(so));
    if (s.grid.n_points < 3) throw ConfigError("config: solver.grid_points must be >= 3" + where(so));
    if (!(s.grid.truncation > 0.0))
      throw ConfigError("config: solver.truncation must be positive" + where(so));
    if (s.gamma_guesses.empty() ||
        std::any_of(s.gamma_guesses.begin(), s.gamma_guesses.end(),
                    [](double g) { return !(g > 0.0) || !std::isfinite(g); }))
      throw ConfigError("config: solver.gamma_guesses must be positive numbers" + where(so));
  }

  if (const auto sw = root["sweep"]) {
    require_map(sw, "sweep");
    reject_unknown(sw, "sweep", {"parameter", "values", "points", "min", "max", "mode"});
    SweepConfig s;
    if (const auto n = sw["parameter"]) {
      try {
        s.parameter = parse_swept_parameter(scalar<std::string>(n, "sweep.parameter"));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what() + where(n));
      }
    }
    if (const auto n = sw["values"]) s.values = double_list(n, "sweep.values");
    optional_field(sw, "sweep", "points", s.points);
    optional_field(sw, "sweep", "min", s.min);
    if (const auto n = sw["max"]) {
      if (!(n.IsScalar() && n.Scalar() == "auto")) s.max = scalar<double>(n, "sweep.max");
    }
    if (const auto n = sw["mode"])
      s.mode = parse_enum<SweepMode>(n, "sweep.mode",
                                     {{"rational", SweepMode::rational},
                                      {"naive", SweepMode::naive},
                                      {"both", SweepMode::both}});
    if (s.values.empty() && s.points == 0)
      throw ConfigError("config: sweep.points must be positive" + where(sw));
    if (s.parameter != SweptParameter::alpha && s.values.empty() && !s.max)
      throw ConfigError("config: sweep.max or sweep.values required when sweeping " +
                        std::string(to_string(s.parameter)) + where(sw));
    cfg.sweep = s;
  }

  if (const auto mb = root["market_b"]) {
    require_map(mb, "market_b");
    reject_unknown(mb, "market_b", {"sigma_multiplier", "target_default"});
    optional_field(mb, "market_b", "sigma_multiplier", cfg.market_b.sigma_multiplier);
    optional_field(mb, "market_b", "target_default", cfg.market_b.target_default);
    if (!(cfg.market_b.sigma_multiplier > 0.0))
      throw ConfigError("config: market_b.sigma_multiplier must be positive" + where(mb));
    if (!(cfg.market_b.target_default > 0.0 && cfg.market_b.target_default < 1.0))
      throw ConfigError("config: market_b.target_default must lie in (0, 1)" + where(mb));
  }

  if (const auto out = root["output"]) {
    require_map(out, "output");
    reject_unknown(out, "output", {"directory", "formats", "threads"});
    optional_field(out, "output", "directory", cfg.output.directory);
    if (const auto n = out["formats"]) {
      if (!n.IsSequence()) throw ConfigError("config: 'output.formats' must be a list" + where(n));
      cfg.output.formats.clear();
      for (const auto& f : n) {
        auto s = scalar<std::string>(f, "output.formats");
        if (s != "csv" && s != "json")
          throw ConfigError("config: output.formats entries must be csv or json, got '" + s + "'" +
                            where(f));
        cfg.output.formats.push_back(std::move(s));
      }
    }
    if (const auto n = out["threads"])
      cfg.output.threads = detail::parse_threads(scalar<std::string>(n, "output.threads"),
                                                 "output.threads");
  }
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config: YAML syntax error at line " + std::to_string(e.mark.line + 1) +
                      ", column " + std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  return parse_config(root);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config_string(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Emits every field, so parse_config_string(to_yaml(c)) == c.
inline std::string to_yaml(const RunConfig& c) {
  std::ostringstream os;
  auto num = [](double v) { return format_double(v); };
  auto list = [&](const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
    return s + "]";
  };
  const auto& p = c.scenario;
  os << "scenario:\n"
     << "  beta: " << num(p.beta) << "\n"
     << "  w: " << num(p.w) << "\n"
     << "  sigma_bar: " << num(p.sigma_bar) << "\n"
     << "  sigma: " << num(p.sigma) << "\n"
     << "  theta0: " << num(p.theta0) << "\n"
     << "  c_F: " << num(p.c_F) << "\n"
     << "  c_S: " << num(p.c_S) << "\n"
     << "  alpha: " << num(p.alpha) << "\n"
     << "  tau: " << num(p.tau) << "\n"
     << "  fixed_cost_basis: " << to_string(p.fixed_cost_basis) << "\n";
  const auto& s = c.solver;
  os << "solver:\n"
     << "  tol: " << num(s.tol) << "\n"
     << "  max_outer_iterations: " << s.max_outer_iterations << "\n"
     << "  clearing_max_iterations: " << s.clearing_max_iterations << "\n"
     << "  price_cap: " << num(s.price_cap) << "\n"
     << "  clearing_method: "
     << (s.clearing_method == ClearingMethod::fixed_point ? "fixed_point" : "bracketed") << "\n"
     << "  grid_points: " << s.grid.n_points << "\n"
     << "  truncation: " << num(s.grid.truncation) << "\n"
     << "  gamma_guesses: " << list(s.gamma_guesses) << "\n";
  if (c.sweep) {
    const auto& w = *c.sweep;
    os << "sweep:\n"
       << "  parameter: " << to_string(w.parameter) << "\n";
    if (!w.values.empty()) os << "  values: " << list(w.values) << "\n";
    os << "  points: " << w.points << "\n"
       << "  min: " << num(w.min) << "\n"
       << "  max: " << (w.max ? num(*w.max) : std::string("auto")) << "\n"
       << "  mode: " << to_string(w.mode) << "\n";
  }
  os << "market_b:\n"
     << "  sigma_multiplier: " << num(c.market_b.sigma_multiplier) << "\n"
     << "  target_default: " << num(c.market_b.target_default) << "\n";
  os << "output:\n"
     << "  directory: " << YAML::Node(c.output.directory) << "\n"
     << "  formats: [";
  for (std::size_t i = 0; i < c.output.formats.size(); ++i)
    os << (i ? ", " : "") << c.output.formats[i];
  os << "]\n"
     << "  threads: " << (c.output.threads == 0 ? std::string("auto") : std::to_string(c.output.threads))
     << "\n";
  return os.str();
}

}  // namespace agrifin::io
