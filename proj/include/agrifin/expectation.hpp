#pragma once

// Outer self-consistency gamma = F(gamma), F(gamma) = E^A[p_tau(theta; gamma) theta].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "agrifin/clearing.hpp"
#include "agrifin/errors.hpp"
#include "agrifin/model.hpp"

namespace agrifin {

// Equilibrium price on every quadrature node for one gamma.
struct PriceSchedule {
  QuadratureGrid grid;
  std::vector<double> prices;  // NaN at infeasible nodes
  std::vector<bool> feasible;
  std::vector<ClearingPoint> points;

  bool all_feasible() const {
    return std::all_of(feasible.begin(), feasible.end(), [](bool f) { return f; });
  }

  std::vector<std::size_t> infeasible_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < feasible.size(); ++k)
      if (!feasible[k]) out.push_back(k);
    return out;
  }

  double max_residual() const {
    double r = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k)
      if (feasible[k]) r = std::max(r, points[k].residual);
    return r;
  }
};

struct GammaSolution {
  double gamma = 0.0;
  PriceSchedule schedule;
  ScenarioParams params;  // parameters the fixed point was solved under
  int outer_iterations = 0;
  int evaluations = 0;    // number of F evaluations
  double residual = 0.0;  // |gamma - F(gamma)|
  double multistart_spread = 0.0;
};

struct SolverOptions {
  double tol = 1e-7;
  int max_outer_iterations = 10000;
  ClearingOptions clearing;
};

// Clears every node; nodes without an equilibrium are flagged, not filled.
inline PriceSchedule clear_schedule(double gamma, const QuadratureGrid& grid,
                                    const ScenarioParams& p, const ClearingOptions& opts = {}) {
  PriceSchedule s;
  s.grid = grid;
  const std::size_t n = grid.n_points();
  s.prices.assign(n, std::numeric_limits<double>::quiet_NaN());
  s.feasible.assign(n, false);
  s.points.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    try {
      s.points[k] = solve_price(grid.nodes[k], gamma, p, opts);
      s.prices[k] = s.points[k].price;
      s.feasible[k] = true;
    } catch (const NoEquilibrium&) {
      s.points[k].theta = grid.nodes[k];
      s.points[k].price = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return s;
}

inline void require_feasible(const PriceSchedule& s) {
  if (s.all_feasible()) return;
  auto nodes = s.infeasible_nodes();
  std::vector<double> thetas;
  thetas.reserve(nodes.size());
  for (auto k : nodes) thetas.push_back(s.grid.nodes[k]);
  throw InfeasibleScenario(std::move(nodes), std::move(thetas));
}

// F(gamma) from an already cleared schedule.
inline double expectation_from_schedule(const PriceSchedule& s) {
  return s.grid.expect([&](double theta, std::size_t k) { return s.prices[k] * theta; });
}

inline double evaluate_F(double gamma, const QuadratureGrid& grid, const ScenarioParams& p,
                         const ClearingOptions& opts = {}) {
  if (!(gamma > 0.0)) throw DomainError("evaluate_F: gamma must be positive");
  const auto s = clear_schedule(gamma, grid, p, opts);
  require_feasible(s);
  return expectation_from_schedule(s);
}

// Safeguarded secant on r(gamma) = gamma - F(gamma).
//
// Start pair (guess, 1.01 guess). A secant step is kept only if it stays
// inside the current sign bracket of r and does not increase |r|; otherwise
// a damped Picard step gamma <- (gamma + F(gamma)) / 2 is taken, and if that
// leaves the bracket the bracket is bisected. Below gamma_min some node has
// no equilibrium and F is undefined; F grows without bound as gamma
// approaches gamma_min from above, so r < 0 there.
inline GammaSolution solve_gamma(const ScenarioParams& p, const QuadratureGrid& grid,
                                 double guess = 1.0, const SolverOptions& opts = {}) {
  p.validate();
  if (!(guess > 0.0) || !std::isfinite(guess))
    throw DomainError("solve_gamma: guess must be positive");
  if (!(opts.tol > 0.0)) throw DomainError("solve_gamma: tol must be positive");

  const double gamma_min = minimum_feasible_gamma(grid.nodes, p);
  if (!std::isfinite(gamma_min)) {
    std::vector<std::size_t> nodes;
    std::vector<double> thetas;
    for (std::size_t k = 0; k < grid.n_points(); ++k)
      if (grid.nodes[k] > p.theta0) {
        nodes.push_back(k);
        thetas.push_back(grid.nodes[k]);
      }
    throw InfeasibleScenario(std::move(nodes), std::move(thetas));
  }

  struct Eval {
    double gamma;
    double r;
    PriceSchedule schedule;
  };

  double lo = gamma_min;  // r < 0 at or below
  double hi = std::numeric_limits<double>::infinity();  // r > 0 at or above
  int evaluations = 0;

  auto evaluate = [&](double g) -> std::optional<Eval> {
    ++evaluations;
    auto s = clear_schedule(g, grid, p, opts.clearing);
    if (!s.all_feasible()) {
      lo = std::max(lo, g);
      return std::nullopt;
    }
    const double r = g - expectation_from_schedule(s);
    if (r < 0.0) lo = std::max(lo, g);
    if (r > 0.0) hi = std::min(hi, g);
    return Eval{g, r, std::move(s)};
  };
  auto inside = [&](double g) { return std::isfinite(g) && g > lo && g < hi; };
  auto bisect = [&](double from) {
    return std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * std::max(lo, from);
  };
  // Keeps stepping toward the bracket interior until a feasible point is found.
  auto evaluate_safely = [&](double g, double from) -> Eval {
    for (int attempt = 0; attempt < 200; ++attempt) {
      if (!inside(g)) g = bisect(from);
      if (auto e = evaluate(g)) return std::move(*e);
      g = bisect(from);
    }
    throw ConvergenceFailure("solve_gamma: could not leave the infeasible region",
                             std::numeric_limits<double>::infinity());
  };

  double start = guess;
  if (start <= gamma_min) start = 2.0 * gamma_min;
  Eval prev = evaluate_safely(start, start);
  Eval cur = evaluate_safely(inside(1.01 * prev.gamma) ? 1.01 * prev.gamma : bisect(prev.gamma),
                             prev.gamma);

  int iterations = 0;
  while (!(std::abs(cur.r) < opts.tol)) {
    if (++iterations > opts.max_outer_iterations)
      throw ConvergenceFailure("solve_gamma: outer iteration cap exceeded", std::abs(cur.r));

    std::optional<Eval> next;
    if (cur.r != prev.r) {
      const double cand = cur.gamma - cur.r * (cur.gamma - prev.gamma) / (cur.r - prev.r);
      if (inside(cand)) {
        auto e = evaluate(cand);
        if (e && std::abs(e->r) <= std::abs(cur.r)) next = std::move(e);
      }
    }
    if (!next) next = evaluate_safely(cur.gamma - 0.5 * cur.r, cur.gamma);

    prev = std::move(cur);
    cur = std::move(*next);
  }

  GammaSolution sol;
  sol.gamma = cur.gamma;
  sol.schedule = std::move(cur.schedule);
  sol.params = p;
  sol.outer_iterations = iterations;
  sol.evaluations = evaluations;
  sol.residual = std::abs(cur.r);
  return sol;
}

// Farmer who ignores market integration: gamma solved with alpha forced to 0.
inline GammaSolution solve_gamma_naive(const ScenarioParams& p, const QuadratureGrid& grid,
                                       double guess = 1.0, const SolverOptions& opts = {}) {
  ScenarioParams segmented = p;
  segmented.alpha = 0.0;
  return solve_gamma(segmented, grid, guess, opts);
}

struct MultiStartResult {
  GammaSolution solution;       // from the first start, spread filled in
  std::vector<double> gammas;   // converged gamma per start (NaN on failure)
  std::vector<int> iterations;  // outer iterations per start (-1 on failure)
  std::size_t failures = 0;
  double spread = 0.0;          // max pairwise difference among converged starts
};

inline MultiStartResult solve_gamma_multistart(const ScenarioParams& p,
                                               const QuadratureGrid& grid,
                                               std::span<const double> guesses,
                                               const SolverOptions& opts = {}) {
  if (guesses.empty()) throw DomainError("solve_gamma_multistart: no starting guesses");
  MultiStartResult out;
  std::optional<GammaSolution> first;
  for (double g0 : guesses) {
    try {
      auto sol = solve_gamma(p, grid, g0, opts);
      out.gammas.push_back(sol.gamma);
      out.iterations.push_back(sol.outer_iterations);
      if (!first) first = std::move(sol);
    } catch (const ConvergenceFailure&) {
      out.gammas.push_back(std::numeric_limits<double>::quiet_NaN());
      out.iterations.push_back(-1);
      ++out.failures;
    }
  }
  if (!first) throw ConvergenceFailure("solve_gamma_multistart: no start converged",
                                       std::numeric_limits<double>::infinity());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double g : out.gammas)
    if (!std::isnan(g)) {
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
  out.spread = hi - lo;
  out.solution = std::move(*first);
  out.solution.multistart_spread = out.spread;
  return out;
}

}  // namespace agrifin
