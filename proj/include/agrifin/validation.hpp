#pragma once

// Invariant suite behind `agrifin validate`: solver robustness, conservation,
// analytic-versus-numeric agreement and the sweep shape properties, each
// reported with its measured value and tolerance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <cstdint>
#include <string>
#include <vector>

#include "agrifin/analytic.hpp"
#include "agrifin/expectation.hpp"
#include "agrifin/metrics.hpp"
#include "agrifin/model.hpp"
#include "agrifin/sweep.hpp"

namespace agrifin {

struct ValidationSettings {
  GridConfig grid;
  SolverOptions solver;
  std::size_t sweep_points = 60;
  unsigned threads = 1;
  std::uint64_t seed = 1234567;
  std::size_t random_starts = 20;
  double start_max = 10000.0;
};

namespace detail {

inline PostCheck bounded(std::string name, double measured, double tol, std::string detail = {}) {
  return {std::move(name), std::isfinite(measured) && measured < tol, measured, tol,
          std::move(detail)};
}

// |analytic - (gamma0 + gamma2)| on log-spaced x, least-squares slope in log-log.
inline double series_truncation_slope(const ScenarioParams& base, double x_lo, double x_hi,
                                      int n) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = x_lo * std::pow(x_hi / x_lo, static_cast<double>(i) / (n - 1));
    ScenarioParams p = base;
    p.sigma_bar = x * p.theta0 / std::sqrt(p.tau);
    const double err = std::abs(analytic_gamma(p) - (analytic_gamma0(p) + analytic_gamma2(p)));
    const double lx = std::log(x), ly = std::log(err);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

inline std::vector<PostCheck> run_validation(const ScenarioParams& scenario,
                                             const ValidationSettings& vs = {}) {
  std::vector<PostCheck> out;
  const auto grid = build_grid(scenario, vs.grid.n_points, vs.grid.truncation);

  // Solver robustness.
  {
    std::mt19937_64 rng(vs.seed);
    std::uniform_real_distribution<double> start(0.0, vs.start_max);
    std::vector<double> guesses(vs.random_starts);
    for (auto& g : guesses) {
      do g = start(rng);
      while (!(g > 0.0));
    }
    const auto ms = solve_gamma_multistart(scenario, grid, guesses, vs.solver);
    out.push_back(detail::bounded("multistart_gamma_spread", ms.failures ? INFINITY : ms.spread,
                                  1e-6, std::to_string(guesses.size()) + " starts in (0, " +
                                            std::to_string(vs.start_max) + "]"));
    double worst = 0.0;
    for (double g : guesses) {
      const auto s = solve_gamma(scenario, grid, g, vs.solver);
      worst = std::max(worst, s.residual);
    }
    out.push_back(detail::bounded("fixed_point_residual", worst, 1e-7, "max |gamma - F(gamma)|"));

    const double g1 = ms.solution.gamma;
    const auto fine = build_grid(scenario, 2 * vs.grid.n_points, vs.grid.truncation);
    const double g2 = solve_gamma(scenario, fine, g1, vs.solver).gamma;
    out.push_back(detail::bounded("grid_refinement", std::abs(g1 - g2) / g1, 0.01,
                                  "relative gamma change when the grid doubles"));
  }

  // Conservation and consistency at a few integration levels.
  {
    double residual = 0.0, net = 0.0, accounting = 0.0;
    for (double a : {scenario.alpha, 0.05, 0.1}) {
      ScenarioParams p = scenario;
      p.alpha = a;
      const auto sol = solve_gamma(p, grid, 1.0, vs.solver);
      residual = std::max(residual, sol.schedule.max_residual());
      net = std::max(net, std::abs(mean_financial_position(grid, p)));
      const auto m = compute_metrics(sol, p);
      const double demand = grid.expect([&](double, std::size_t k) {
        return p.w * std::pow(sol.schedule.prices[k], -p.beta);
      });
      accounting = std::max(accounting,
                            std::abs(m.q_mean + mean_financial_position(grid, p) - demand));
    }
    out.push_back(detail::bounded("clearing_residual", residual, 1e-6, "max over nodes"));
    out.push_back(detail::bounded("zero_net_supply", net, 1e-12, "|grid mean of Q_S|"));
    out.push_back(detail::bounded("accounting_identity", accounting, 1e-6,
                                  "|q_mean + mean Q_S - mean demand|"));
    double wsum = 0.0;
    for (double wt : grid.weights) wsum += wt;
    out.push_back(detail::bounded("weights_sum_to_one", std::abs(wsum - 1.0), 1e-12));

    ScenarioParams seg = scenario;
    seg.alpha = 0.0;
    const double gamma = solve_gamma(seg, grid, 1.0, vs.solver).gamma;
    ClearingOptions fp = vs.solver.clearing;
    fp.method = ClearingMethod::fixed_point;
    // The literal iteration may oscillate where supply is steep; only nodes
    // where it converges are compared.
    fp.max_iterations = 10000;
    double diff = 0.0;
    std::size_t converged = 0;
    for (double theta : grid.nodes) {
      try {
        const double b = solve_price(theta, gamma, seg, fp).price;
        const double a = solve_price(theta, gamma, seg, vs.solver.clearing).price;
        diff = std::max(diff, std::abs(a - b));
        ++converged;
      } catch (const ConvergenceFailure&) {
      }
    }
    out.push_back(detail::bounded("clearing_methods_agree", converged ? diff : INFINITY,
                                  10.0 * fp.tol,
                                  "fixed-point vs bracketed price at alpha = 0; fixed point converged at " +
                                      std::to_string(converged) + "/" +
                                      std::to_string(grid.n_points()) + " nodes"));
  }

  // Closed-form single-farmer oracle.
  {
    double worst = 0.0;
    for (double x : {0.02, 0.04, 0.06, 0.08, 0.1}) {
      ScenarioParams p = single_farmer_params(scenario);
      p.sigma_bar = x * p.theta0 / std::sqrt(p.tau);
      const auto g = build_grid(p, vs.grid.n_points, vs.grid.truncation);
      const double num = solve_gamma(p, g, 1.0, vs.solver).gamma;
      worst = std::max(worst, std::abs(num - analytic_gamma(p)) / analytic_gamma(p));
    }
    out.push_back(detail::bounded("analytic_gamma_agreement", worst, 0.01,
                                  "single farmer, x in [0.02, 0.1]"));
    const double slope = detail::series_truncation_slope(scenario, 1e-3, 1e-1, 21);
    out.push_back(detail::bounded("series_truncation_slope", std::abs(slope - 4.0), 0.3,
                                  "log-log slope " + std::to_string(slope) + ", expected 4"));
    ScenarioParams p0 = scenario;
    p0.alpha = 0.0;
    out.push_back(detail::bounded("analytic_mu_S_no_trading", std::abs(analytic_mu_S(p0) + 1.0),
                                  1e-15, "mu_S at alpha = 0 must be -1"));
  }

  // Comparative statics.
  {
    SweepSpec spec;
    spec.base = scenario;
    spec.base.alpha = 0.0;
    spec.grid = vs.grid;
    spec.solver = vs.solver;
    spec.threads = vs.threads;
    spec.mode = SweepMode::both;
    spec.values = alpha_values(vs.sweep_points, default_alpha_max(spec.base, vs.grid, vs.solver));
    const auto r = run_sweep(spec);

    double dmin = INFINITY, dmax = -INFINITY;
    for (const auto& row : r.rows)
      if (row.rational) {
        dmin = std::min(dmin, row.rational->default_frac);
        dmax = std::max(dmax, row.rational->default_frac);
      }
    const double d0 = r.rows.front().rational ? r.rows.front().rational->default_frac : NAN;
    out.push_back(detail::bounded("default_rate_level", std::abs(d0 - 0.30), 0.05,
                                  "segmented default fraction vs 0.30"));
    out.push_back(detail::bounded("default_rate_variation", dmax - dmin, 0.05,
                                  "max - min over the alpha sweep"));

    for (auto& c : sweep_post_checks(r)) out.push_back(std::move(c));

    if (r.alpha_c) {
      if (const auto ac = analytic_alpha_c(spec.base)) {
        out.push_back(detail::bounded("alpha_c_vs_analytic", std::abs(*r.alpha_c - *ac) / *ac, 0.25,
                                      "relative gap to the closed-form root"));
      }
    } else {
      out.push_back({"alpha_c_detected", false, NAN, 0.0, r.alpha_c_status});
    }

    double worst = 0.0;
    double where = NAN;
    for (const auto& row : r.rows) {
      if (!r.alpha_c || row.value <= *r.alpha_c || !row.rational || !row.naive) continue;
      const double gap = row.naive->mu_F - row.rational->mu_F;
      if (gap > worst) {
        worst = gap;
        where = row.value;
      }
    }
    out.push_back({"naive_mu_F_below_rational", worst <= 0.0, worst, 0.0,
                   worst > 0.0 ? "largest naive excess at alpha=" + std::to_string(where)
                               : "for alpha > alpha_c"});
  }
  return out;
}

}  // namespace agrifin
