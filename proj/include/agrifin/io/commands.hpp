#pragma once

// Subcommands of the agrifin CLI. Each takes a fully resolved RunConfig
// (file plus flag overrides), computes everything first, then writes its
// artifacts from this thread and returns the process exit code.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "agrifin/analytic.hpp"
#include "agrifin/expectation.hpp"
#include "agrifin/io/config.hpp"
#include "agrifin/io/report.hpp"
#include "agrifin/metrics.hpp"
#include "agrifin/sweep.hpp"
#include "agrifin/validation.hpp"

namespace agrifin::io {

enum ExitCode : int {
  exit_ok = 0,
  exit_validation_failure = 1,
  exit_config_error = 2,
  exit_sweep_infeasible = 3,
  exit_convergence_failure = 4,
  exit_calibration_failure = 5,
};

inline constexpr const char* exit_code_help =
    "Exit codes: 0 ok, 1 validation failure, 2 config error, 3 infeasible scenario or sweep "
    "mostly infeasible, 4 convergence failure, 5 Market B calibration unreachable.";

// Integration level used for the second curve of figure 1 when the scenario has alpha = 0.
inline constexpr double figure1_default_alpha = 0.4;

namespace detail {

class Output {
public:
  explicit Output(const RunConfig& cfg) : cfg_(cfg), dir_(cfg.output.directory) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
      throw ConfigError("output directory '" + dir_.string() + "' is not writable");
  }

  const std::filesystem::path& dir() const { return dir_; }

  void csv(const std::string& name, const CsvTable& t) const {
    if (cfg_.output.wants("csv")) write_text(dir_ / name, t.str());
  }
  void json(const std::string& name, const Json& j) const {
    if (cfg_.output.wants("json")) write_text(dir_ / name, j.dump(2) + "\n");
  }
  void text(const std::string& name, const std::string& s) const { write_text(dir_ / name, s); }

private:
  const RunConfig& cfg_;
  std::filesystem::path dir_;
};

inline SweepMode configured_mode(const RunConfig& cfg) {
  return cfg.sweep ? cfg.sweep->mode : SweepMode::both;
}

inline GammaSolution solve_configured(const ScenarioParams& p, const RunConfig& cfg,
                                      double* spread = nullptr) {
  const auto grid = build_grid(p, cfg.solver.grid.n_points, cfg.solver.grid.truncation);
  const auto opts = cfg.solver.options();
  if (cfg.solver.gamma_guesses.size() == 1)
    return solve_gamma(p, grid, cfg.solver.gamma_guesses.front(), opts);
  auto ms = solve_gamma_multistart(p, grid, cfg.solver.gamma_guesses, opts);
  if (spread) *spread = ms.spread;
  return std::move(ms.solution);
}

inline double figure1_alpha(const RunConfig& cfg) {
  return cfg.scenario.alpha > 0.0 ? cfg.scenario.alpha : figure1_default_alpha;
}

}  // namespace detail

// Sweep specification from the config: explicit values, or `points` values
// over [min, max]. For alpha with no max the range is the half-open
// feasible interval [min, alpha_max).
inline SweepSpec build_sweep_spec(const RunConfig& cfg, std::optional<SweepMode> mode = {}) {
  const SweepConfig sc = cfg.sweep.value_or(SweepConfig{});
  SweepSpec spec;
  spec.base = cfg.scenario;
  spec.swept = sc.parameter;
  spec.mode = mode.value_or(sc.mode);
  spec.grid = cfg.solver.grid;
  spec.solver = cfg.solver.options();
  spec.gamma_guess = cfg.solver.gamma_guesses.front();
  spec.threads = cfg.output.threads;
  if (!sc.values.empty()) {
    spec.values = sc.values;
    return spec;
  }
  if (sc.max) {
    const std::size_t n = sc.points;
    spec.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      spec.values[i] = n == 1 ? sc.min
                              : sc.min + (*sc.max - sc.min) * static_cast<double>(i) /
                                             static_cast<double>(n - 1);
    return spec;
  }
  if (sc.parameter != SweptParameter::alpha)
    throw ConfigError("sweep.max or sweep.values required for this parameter");
  const double hi = default_alpha_max(spec.base, spec.grid, spec.solver);
  if (!(hi > sc.min)) throw ConfigError("sweep.min lies above the feasible alpha range");
  spec.values.resize(sc.points);
  for (std::size_t i = 0; i < sc.points; ++i)
    spec.values[i] = sc.min + (hi - sc.min) * static_cast<double>(i) / static_cast<double>(sc.points);
  return spec;
}

inline bool mostly_feasible(const SweepResult& r) {
  return 10 * r.feasible_rows() >= 9 * r.rows.size();
}

// ---------------------------------------------------------------------------

inline int cmd_solve(const RunConfig& cfg, std::ostream& log = std::cerr) {
  const auto& p = cfg.scenario;
  const SweepMode mode = detail::configured_mode(cfg);
  Json summary;
  summary["scenario"] = to_json(p);
  summary["grid"] = Json{{"points", cfg.solver.grid.n_points}, {"truncation", cfg.solver.grid.truncation}};

  std::optional<GammaSolution> rational, naive;
  std::optional<EquilibriumMetrics> m_rational, m_naive;
  double spread = 0.0;
  try {
    if (includes(mode, FarmerMode::rational)) {
      rational = detail::solve_configured(p, cfg, &spread);
      m_rational = compute_metrics(*rational, p, FarmerMode::rational, cfg.solver.options().clearing);
    }
    if (includes(mode, FarmerMode::naive)) {
      ScenarioParams seg = p;
      seg.alpha = 0.0;
      naive = detail::solve_configured(seg, cfg);
      m_naive = compute_metrics(*naive, p, FarmerMode::naive, cfg.solver.options().clearing);
    }
  } catch (const InfeasibleScenario& e) {
    log << "solve: infeasible scenario: " << e.what() << "\n";
    return exit_sweep_infeasible;
  } catch (const ConvergenceFailure& e) {
    log << "solve: " << e.what() << " (residual " << e.residual() << ")\n";
    return exit_convergence_failure;
  }

  detail::Output out(cfg);
  CsvTable metrics([] {
    std::vector<std::string> h{"mode", "alpha"};
    for (const auto& c : metric_columns()) h.push_back(c);
    return h;
  }());
  auto emit = [&](const char* name, const GammaSolution& sol, const EquilibriumMetrics& m) {
    std::vector<std::string> cells{name, format_double(m.alpha)};
    for (double v : metric_values(m)) cells.push_back(format_double(v));
    metrics.add_cells(std::move(cells));
    Json j = to_json(m);
    j["outer_iterations"] = sol.outer_iterations;
    j["evaluations"] = sol.evaluations;
    j["residual"] = number(sol.residual);
    summary[name] = j;
  };
  if (rational) {
    emit("rational", *rational, *m_rational);
    out.csv("schedule_rational.csv", schedule_table(rational->schedule, p));
    summary["gamma"] = rational->gamma;
    summary["default_frac"] = number(m_rational->default_frac);
    summary["multistart_spread"] = spread;
  }
  if (naive) {
    ScenarioParams exposed = p;
    const auto grid = build_grid(p, cfg.solver.grid.n_points, cfg.solver.grid.truncation);
    emit("naive", *naive, *m_naive);
    out.csv("schedule_naive.csv",
            schedule_table(clear_schedule(naive->gamma, grid, exposed, cfg.solver.options().clearing),
                           exposed));
    if (!rational) {
      summary["gamma"] = naive->gamma;
      summary["default_frac"] = number(m_naive->default_frac);
    }
  }
  summary["nodes"] = (rational ? rational->schedule : naive->schedule).grid.n_points();
  out.csv("metrics.csv", metrics);
  out.json("summary.json", summary);
  log << "solve: gamma=" << format_double(summary["gamma"].get<double>())
      << " default_frac=" << summary["default_frac"].dump() << " -> " << out.dir().string() << "\n";
  return exit_ok;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& log = std::cerr) {
  const auto spec = build_sweep_spec(cfg);
  const auto r = run_sweep(spec);
  detail::Output out(cfg);
  out.csv("sweep.csv", sweep_table(r));
  out.json("sweep.json", sweep_summary(r));
  log << "sweep: " << r.feasible_rows() << "/" << r.rows.size() << " feasible rows -> "
      << out.dir().string() << "\n";
  return mostly_feasible(r) ? exit_ok : exit_sweep_infeasible;
}

// ---------------------------------------------------------------------------
// Figures. Every figure writes fig<N>.csv (plus extras), fig<N>.json with
// run metadata and fig<N>.gp, a gnuplot script that reads the CSVs.

namespace detail {

inline std::string gnuplot_header(const std::string& title, const std::string& xlabel) {
  return "set datafile separator ','\nset key autotitle columnhead\nset title '" + title +
         "'\nset xlabel '" + xlabel + "'\nset grid\n";
}

inline double field(const std::optional<EquilibriumMetrics>& m,
                    double EquilibriumMetrics::*member) {
  return m ? (*m).*member : std::numeric_limits<double>::quiet_NaN();
}

inline Json figure_meta(int id, const SweepResult& r) {
  Json j = sweep_summary(r);
  j["figure"] = id;
  return j;
}

inline int figure1(const RunConfig& cfg, const Output& out, std::ostream& log) {
  const double a_fin = figure1_alpha(cfg);
  ScenarioParams p0 = cfg.scenario, p1 = cfg.scenario;
  p0.alpha = 0.0;
  p1.alpha = a_fin;
  const auto grid = build_grid(p0, cfg.solver.grid.n_points, cfg.solver.grid.truncation);
  const auto opts = cfg.solver.options();
  const auto s0 = solve_gamma(p0, grid, cfg.solver.gamma_guesses.front(), opts);
  const auto s1 = solve_gamma(p1, grid, cfg.solver.gamma_guesses.front(), opts);
  CsvTable t({"theta_minus_theta0", "price_alpha0", "price_alpha_finite"});
  for (std::size_t k = 0; k < grid.n_points(); ++k)
    t.add_row({grid.nodes[k] - p0.theta0, s0.schedule.prices[k], s1.schedule.prices[k]});
  out.csv("fig1.csv", t);
  auto range = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  out.json("fig1.json", Json{{"figure", 1},
                             {"alpha_finite", a_fin},
                             {"gamma_alpha0", s0.gamma},
                             {"gamma_alpha_finite", s1.gamma},
                             {"price_range_alpha0", number(range(s0.schedule.prices))},
                             {"price_range_alpha_finite", number(range(s1.schedule.prices))},
                             {"scenario", to_json(cfg.scenario)}});
  out.text("fig1.gp", gnuplot_header("Price against aggregate fitness", "theta - theta0") +
                          "set ylabel 'price'\nplot 'fig1.csv' using 1:2 with lines, "
                          "'' using 1:3 with lines\n");
  log << "figure 1: alpha_finite=" << a_fin << "\n";
  return exit_ok;
}

inline int figure3_analytic(const RunConfig& cfg, const Output& out) {
  const std::vector<double> betas{0.2, 0.4, 0.6};
  std::vector<std::string> header{"sigma_bar"};
  for (double b : betas) header.push_back("mu_S_at_alpha_star_beta_" + format_double(b));
  CsvTable t(header);
  for (int i = 1; i <= 60; ++i) {
    const double sb = 0.005 * i;
    std::vector<double> row{sb};
    for (double b : betas) {
      ScenarioParams p = cfg.scenario;
      p.beta = b;
      p.sigma_bar = sb;
      try {
        row.push_back(analytic_alpha_star(p).mu_S);
      } catch (const std::domain_error&) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    t.add_row(row);
  }
  out.csv("fig3_analytic.csv", t);
  return exit_ok;
}

}  // namespace detail

inline int cmd_figure(const RunConfig& cfg, int id, std::ostream& log = std::cerr) {
  if (id < 1 || id > 6) throw ConfigError("figure id must be between 1 and 6");
  detail::Output out(cfg);
  if (id == 1) return detail::figure1(cfg, out, log);

  using M = EquilibriumMetrics;
  using detail::field;
  const std::string name = "fig" + std::to_string(id);
  const SweepMode mode = id == 4 ? SweepMode::both : SweepMode::rational;
  RunConfig alpha_cfg = cfg;
  if (alpha_cfg.sweep && alpha_cfg.sweep->parameter != SweptParameter::alpha)
    throw ConfigError("figures 2-6 sweep alpha; sweep.parameter must be alpha");
  const auto spec = build_sweep_spec(alpha_cfg, mode);
  const auto r = run_sweep(spec);
  bool ok = mostly_feasible(r);
  Json meta = detail::figure_meta(id, r);
  std::string plot = detail::gnuplot_header(name, "alpha");

  if (id == 2) {
    CsvTable t({"alpha", "price_mean", "price_std"});
    for (const auto& row : r.rows)
      t.add_row({row.value, field(row.rational, &M::price_mean), field(row.rational, &M::price_std)});
    out.csv("fig2.csv", t);
    plot += "plot 'fig2.csv' using 1:2 with lines, '' using 1:3 with lines axes x1y2\n";
  } else if (id == 3) {
    CsvTable t({"alpha", "mu_S", "sigma_S", "mu_F", "sigma_F", "sigma_F_aggregate"});
    for (const auto& row : r.rows)
      t.add_row({row.value, field(row.rational, &M::mu_S), field(row.rational, &M::sigma_S),
                 field(row.rational, &M::mu_F), field(row.rational, &M::sigma_F),
                 field(row.rational, &M::sigma_F_aggregate)});
    out.csv("fig3.csv", t);
    detail::figure3_analytic(cfg, out);
    plot += "set multiplot layout 2,1\n"
            "plot 'fig3.csv' using 1:2:3 with yerrorlines, '' using 1:4:5 with yerrorlines\n"
            "set xlabel 'sigma_bar'\n"
            "plot 'fig3_analytic.csv' using 1:2 with lines, '' using 1:3 with lines, "
            "'' using 1:4 with lines\n"
            "unset multiplot\n";
  } else if (id == 4) {
    CsvTable t({"alpha", "mu_F_rational", "mu_F_naive", "mu_S_rational", "mu_S_naive"});
    for (const auto& row : r.rows)
      t.add_row({row.value, field(row.rational, &M::mu_F), field(row.naive, &M::mu_F),
                 field(row.rational, &M::mu_S), field(row.naive, &M::mu_S)});
    out.csv("fig4.csv", t);
    plot += "plot for [c=2:5] 'fig4.csv' using 1:c with lines\n";
  } else if (id == 5) {
    CsvTable t({"alpha", "q_mean", "q_std", "default_frac", "default_frac_std"});
    for (const auto& row : r.rows)
      t.add_row({row.value, field(row.rational, &M::q_mean), field(row.rational, &M::q_std),
                 field(row.rational, &M::default_frac), field(row.rational, &M::default_frac_std)});
    out.csv("fig5.csv", t);
    plot += "set multiplot layout 2,1\n"
            "plot 'fig5.csv' using 1:2:3 with yerrorlines\n"
            "plot 'fig5.csv' using 1:4:5 with yerrorlines\n"
            "unset multiplot\n";
  } else {
    // Market B: calibrated if reachable, otherwise the closest demand scale.
    Json calib;
    ScenarioParams market_b;
    try {
      const auto c = calibrate_market_B(cfg.scenario, cfg.market_b.target_default,
                                        cfg.market_b.sigma_multiplier, spec.grid, spec.solver);
      market_b = c.params;
      calib = Json{{"reached", true}, {"w", c.params.w}, {"default_frac", c.default_frac}};
    } catch (const CalibrationFailure& e) {
      market_b = market_b_params(cfg.scenario, e.closest_w(), cfg.market_b.sigma_multiplier,
                                 spec.grid, spec.solver);
      calib = Json{{"reached", false},
                   {"w", e.closest_w()},
                   {"default_frac", e.closest_default()},
                   {"message", e.what()}};
      log << "figure 6: " << e.what() << "; using closest w=" << e.closest_w() << "\n";
    }
    calib["target_default"] = cfg.market_b.target_default;
    calib["sigma_multiplier"] = cfg.market_b.sigma_multiplier;
    calib["params"] = to_json(market_b);
    SweepSpec spec_b = spec;
    spec_b.base = market_b;
    spec_b.base.alpha = 0.0;
    const auto rb = run_sweep(spec_b);
    ok = ok && mostly_feasible(rb);
    const auto rel_a = relative_quantity_volatility(r);
    const auto rel_b = relative_quantity_volatility(rb);
    CsvTable t({"alpha", "sigma_Q_relative_marketA", "sigma_Q_relative_marketB"});
    for (std::size_t i = 0; i < r.rows.size(); ++i) t.add_row({r.rows[i].value, rel_a[i], rel_b[i]});
    out.csv("fig6.csv", t);
    meta["market_b"] = calib;
    meta["market_b_sweep"] = sweep_summary(rb);
    plot += "set ylabel 'sigma_Q / sigma_Q(alpha=0)'\nplot 'fig6.csv' using 1:2 with lines, "
            "'' using 1:3 with lines\n";
  }

  out.json(name + ".json", meta);
  out.text(name + ".gp", plot);
  log << "figure " << id << ": " << r.feasible_rows() << "/" << r.rows.size()
      << " feasible rows -> " << out.dir().string() << "\n";
  return ok ? exit_ok : exit_sweep_infeasible;
}

// ---------------------------------------------------------------------------

inline int cmd_validate(const RunConfig& cfg, std::ostream& log = std::cerr) {
  ValidationSettings vs;
  vs.grid = cfg.solver.grid;
  vs.solver = cfg.solver.options();
  vs.threads = cfg.output.threads;
  if (cfg.sweep && cfg.sweep->points > 0) vs.sweep_points = cfg.sweep->points;
  std::vector<PostCheck> checks;
  try {
    checks = run_validation(cfg.scenario, vs);
  } catch (const InfeasibleScenario& e) {
    log << "validate: infeasible scenario: " << e.what() << "\n";
    return exit_sweep_infeasible;
  } catch (const ConvergenceFailure& e) {
    log << "validate: " << e.what() << "\n";
    return exit_convergence_failure;
  }

  Json list = Json::array();
  std::size_t failed = 0;
  for (const auto& c : checks) {
    list.push_back(to_json(c));
    if (!c.passed) {
      ++failed;
      log << "FAIL " << c.name << ": measured " << format_double(c.measured) << ", tolerance "
          << format_double(c.tolerance) << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
    }
  }
  detail::Output out(cfg);
  out.json("validate.json", Json{{"scenario", to_json(cfg.scenario)},
                                 {"passed", failed == 0},
                                 {"failed", failed},
                                 {"total", checks.size()},
                                 {"checks", list}});
  log << "validate: " << checks.size() - failed << "/" << checks.size() << " invariants hold\n";
  return failed == 0 ? exit_ok : exit_validation_failure;
}

inline int cmd_calibrate(const RunConfig& cfg, std::ostream& log = std::cerr) {
  detail::Output out(cfg);
  const auto opts = cfg.solver.options();
  try {
    const auto c = calibrate_market_B(cfg.scenario, cfg.market_b.target_default,
                                      cfg.market_b.sigma_multiplier, cfg.solver.grid, opts);
    RunConfig b = cfg;
    b.scenario = c.params;
    b.scenario.alpha = cfg.scenario.alpha;
    out.text("market_b.yaml", to_yaml(b));
    out.json("market_b.json", Json{{"reached", true},
                                   {"target_default", cfg.market_b.target_default},
                                   {"default_frac", c.default_frac},
                                   {"iterations", c.iterations},
                                   {"params", to_json(c.params)}});
    log << "calibrate-market-b: w=" << format_double(c.params.w)
        << " default_frac=" << format_double(c.default_frac) << "\n";
    return exit_ok;
  } catch (const CalibrationFailure& e) {
    out.json("market_b.json", Json{{"reached", false},
                                   {"target_default", cfg.market_b.target_default},
                                   {"closest_w", e.closest_w()},
                                   {"closest_default_frac", e.closest_default()},
                                   {"message", e.what()}});
    log << "calibrate-market-b: " << e.what() << "\n";
    return exit_calibration_failure;
  }
}

}  // namespace agrifin::io
