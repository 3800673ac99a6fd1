#pragma once

// Equilibrium observables computed from a converged price schedule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <tuple>
#include <utility>
#include <vector>

#include "agrifin/clearing.hpp"
#include "agrifin/expectation.hpp"
#include "agrifin/model.hpp"

namespace agrifin {

enum class FarmerMode { rational, naive };

inline const char* to_string(FarmerMode m) {
  return m == FarmerMode::naive ? "naive" : "rational";
}

struct FarmerMetrics {
  double pi_F = 0.0;
  double M_F = 0.0;
  double mu_F = 0.0;
  double sigma_F = 0.0;            // joint aggregate x idiosyncratic dispersion of pi_F / M_F
  double sigma_F_aggregate = 0.0;  // dispersion of E^I[pi_F] / M_F across aggregate states
};

struct InvestorMetrics {
  double pi_S = 0.0;
  double M_S = 0.0;
  double mu_S = 0.0;
  double sigma_S = 0.0;
  bool degenerate = false;  // no trading (alpha = 0) or zero long-side capital
};

struct EquilibriumMetrics {
  double alpha = 0.0;
  double gamma = 0.0;
  double q_mean = 0.0;
  double q_std = 0.0;
  double price_mean = 0.0;
  double price_std = 0.0;
  double default_frac = 0.0;
  double default_frac_std = 0.0;
  double pi_F = 0.0;
  double M_F = 0.0;
  double mu_F = 0.0;
  double sigma_F = 0.0;
  double sigma_F_aggregate = 0.0;
  double pi_S = 0.0;
  double M_S = 0.0;
  double mu_S = 0.0;
  double sigma_S = 0.0;
  bool investor_degenerate = false;
};

namespace detail {

struct Moments {
  double mean;
  double std_dev;
};

// Two-pass weighted mean and standard deviation, node order.
template <class Fn>
Moments grid_moments(const QuadratureGrid& grid, Fn&& value) {
  const double mean = grid.expect(value);
  const double var = grid.expect([&](double theta, std::size_t k) {
    const double d = value(theta, k) - mean;
    return d * d;
  });
  return {mean, std::sqrt(var)};
}

inline double node_default_fraction(const ClearingPoint& pt, const ScenarioParams& p) {
  const double idio = FitnessDistributions::from(p).idiosyncratic_std;
  if (idio == 0.0) return pt.theta > pt.theta_star ? 0.0 : 1.0;
  return 1.0 - survival_probability(pt.theta_star, pt.theta, idio);
}

// First and second upper partial moments of the idiosyncratic law at one node.
inline std::pair<double, double> survivor_moments(const ClearingPoint& pt,
                                                  const ScenarioParams& p) {
  const double idio = FitnessDistributions::from(p).idiosyncratic_std;
  if (idio == 0.0) {
    const bool survives = pt.theta > pt.theta_star;
    return {survives ? pt.theta : 0.0, survives ? pt.theta * pt.theta : 0.0};
  }
  return {gaussian_partial_moment(pt.theta_star, pt.theta, idio),
          gaussian_partial_second_moment(pt.theta_star, pt.theta, idio)};
}

}  // namespace detail

// Grid-weighted mean of the investor position; zero for a symmetric grid.
inline double mean_financial_position(const QuadratureGrid& grid, const ScenarioParams& p) {
  return grid.expect([&](double theta, std::size_t) { return financial_demand(theta, p); });
}

// Mean and aggregate dispersion of the per-state default fraction.
inline std::pair<double, double> compute_default_fraction(const GammaSolution& sol,
                                                          const ScenarioParams& p) {
  const auto& s = sol.schedule;
  const auto m = detail::grid_moments(s.grid, [&](double, std::size_t k) {
    return detail::node_default_fraction(s.points[k], p);
  });
  return {m.mean, m.std_dev};
}

// Farmer profit: (gamma/2) p theta^i - M_F above the threshold, -M_F below,
// with M_F = (gamma/2)^2 + c_F. Idiosyncratic moments are exact truncated
// Gaussian moments; the joint variance uses the law of total variance.
inline FarmerMetrics compute_farmer_metrics(const GammaSolution& sol, const ScenarioParams& p) {
  const auto& s = sol.schedule;
  const double half_gamma = 0.5 * sol.gamma;
  FarmerMetrics f;
  f.M_F = optimal_investment(sol.gamma) + effective_fixed_cost(p, sol.gamma);

  std::vector<double> first(s.grid.n_points()), second(s.grid.n_points());
  for (std::size_t k = 0; k < s.grid.n_points(); ++k) {
    const auto [pm1, pm2] = detail::survivor_moments(s.points[k], p);
    const double revenue_scale = half_gamma * s.points[k].price;
    first[k] = -f.M_F + revenue_scale * pm1;
    second[k] = f.M_F * f.M_F - 2.0 * f.M_F * revenue_scale * pm1 +
                revenue_scale * revenue_scale * pm2;
  }
  const auto agg = detail::grid_moments(s.grid, [&](double, std::size_t k) { return first[k]; });
  const double within = s.grid.expect([&](double, std::size_t k) {
    return std::max(0.0, second[k] - first[k] * first[k]);
  });
  f.pi_F = agg.mean;
  f.mu_F = f.pi_F / f.M_F;
  f.sigma_F = std::sqrt(within + agg.std_dev * agg.std_dev) / f.M_F;
  f.sigma_F_aggregate = agg.std_dev / f.M_F;
  return f;
}

// Investor profit pi_S = alpha (theta0 - theta) p - c_S; M_S is the expected
// long-side capital E^A[(Q_S p + c_S) 1{theta < theta0}].
inline InvestorMetrics compute_investor_metrics(const GammaSolution& sol,
                                                const ScenarioParams& p) {
  const auto& s = sol.schedule;
  auto profit = [&](double theta, std::size_t k) {
    return financial_demand(theta, p) * s.points[k].price - p.c_S;
  };
  InvestorMetrics inv;
  const auto pm = detail::grid_moments(s.grid, profit);
  inv.pi_S = pm.mean;
  inv.M_S = s.grid.expect([&](double theta, std::size_t k) {
    return theta < p.theta0 ? financial_demand(theta, p) * s.points[k].price + p.c_S : 0.0;
  });
  inv.degenerate = p.alpha == 0.0 || inv.M_S == 0.0;
  if (inv.M_S == 0.0) {
    inv.mu_S = std::numeric_limits<double>::quiet_NaN();
    inv.sigma_S = std::numeric_limits<double>::quiet_NaN();
  } else {
    inv.mu_S = inv.pi_S / inv.M_S;
    inv.sigma_S = pm.std_dev / inv.M_S;
  }
  return inv;
}

namespace detail {

inline EquilibriumMetrics assemble_metrics(const GammaSolution& sol, const ScenarioParams& p) {
  const auto& s = sol.schedule;
  EquilibriumMetrics m;
  m.alpha = p.alpha;
  m.gamma = sol.gamma;
  const auto q = grid_moments(s.grid, [&](double, std::size_t k) { return s.points[k].q_supply; });
  const auto pr = grid_moments(s.grid, [&](double, std::size_t k) { return s.prices[k]; });
  m.q_mean = q.mean;
  m.q_std = q.std_dev;
  m.price_mean = pr.mean;
  m.price_std = pr.std_dev;
  std::tie(m.default_frac, m.default_frac_std) = compute_default_fraction(sol, p);
  const auto f = compute_farmer_metrics(sol, p);
  m.pi_F = f.pi_F;
  m.M_F = f.M_F;
  m.mu_F = f.mu_F;
  m.sigma_F = f.sigma_F;
  m.sigma_F_aggregate = f.sigma_F_aggregate;
  const auto inv = compute_investor_metrics(sol, p);
  m.pi_S = inv.pi_S;
  m.M_S = inv.M_S;
  m.mu_S = inv.mu_S;
  m.sigma_S = inv.sigma_S;
  m.investor_degenerate = inv.degenerate;
  return m;
}

}  // namespace detail

// Rational: sol was solved at p.alpha. Naive: sol.gamma was solved at alpha = 0
// and the market is re-cleared at the true p.alpha with that gamma.
inline EquilibriumMetrics compute_metrics(const GammaSolution& sol, const ScenarioParams& p,
                                          FarmerMode mode = FarmerMode::rational,
                                          const ClearingOptions& clearing = {}) {
  if (mode == FarmerMode::rational) {
    if (sol.params.alpha != p.alpha)
      throw DomainError("compute_metrics: rational solution solved at a different alpha");
    return detail::assemble_metrics(sol, p);
  }
  if (sol.params.alpha != 0.0)
    throw DomainError("compute_metrics: naive mode expects a gamma solved at alpha = 0");
  GammaSolution exposed = sol;
  exposed.params = p;
  exposed.schedule = clear_schedule(sol.gamma, sol.schedule.grid, p, clearing);
  require_feasible(exposed.schedule);
  return detail::assemble_metrics(exposed, p);
}

}  // namespace agrifin
