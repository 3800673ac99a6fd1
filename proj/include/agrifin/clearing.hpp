#pragma once

// Per-node market clearing: w / p^beta = Q_tau(p) + Q_S.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include <boost/math/tools/toms748_solve.hpp>

#include "agrifin/errors.hpp"
#include "agrifin/model.hpp"

namespace agrifin {

struct ClearingPoint {
  double theta = 0.0;        // aggregate fitness realisation
  double price = 0.0;        // equilibrium price
  double q_supply = 0.0;     // production of surviving farmers
  double q_financial = 0.0;  // investor net supply alpha (theta0 - theta)
  double theta_star = 0.0;   // default threshold
  int iterations = 0;
  double residual = 0.0;     // |w / p^beta - q_supply - q_financial|
};

enum class ClearingMethod {
  bracketed,    // bracket expansion + TOMS 748 on excess demand
  fixed_point,  // p <- (w / (Q(p) + Q_S))^(1/beta)
};

struct ClearingOptions {
  double tol = 1e-7;
  int max_iterations = 200;
  double price_cap = 1e12;
  ClearingMethod method = ClearingMethod::bracketed;
};

// Investor net supply; positive when theta < theta0 (extra supply), negative
// when theta > theta0 (extra demand).
inline double financial_demand(double theta, const ScenarioParams& p) {
  return p.alpha * (p.theta0 - theta);
}

// Smallest idiosyncratic fitness with non-negative profit.
inline double default_threshold(double price, double gamma, const ScenarioParams& p) {
  if (!(price > 0.0)) throw DomainError("default_threshold: price must be positive");
  if (!(gamma > 0.0)) throw DomainError("default_threshold: gamma must be positive");
  const double cost = effective_fixed_cost(p, gamma);
  return std::max(0.0, (0.5 * gamma + 2.0 * cost / gamma) / price);
}

namespace detail {

inline double supply_given_threshold(double theta, double theta_star, double gamma,
                                     const ScenarioParams& p) {
  const double idio = FitnessDistributions::from(p).idiosyncratic_std;
  if (idio == 0.0) return theta > theta_star ? 0.5 * gamma * theta : 0.0;
  return 0.5 * gamma * gaussian_partial_moment(theta_star, theta, idio);
}

}  // namespace detail

// Aggregate production brought to market by farmers above the default threshold.
inline double survivor_supply(double theta, double price, double gamma, const ScenarioParams& p) {
  return detail::supply_given_threshold(theta, default_threshold(price, gamma, p), gamma, p);
}

// Supply as price -> infinity (threshold clamps to zero).
inline double maximal_supply(double theta, double gamma, const ScenarioParams& p) {
  return detail::supply_given_threshold(theta, 0.0, gamma, p);
}

inline double excess_demand(double theta, double price, double gamma, const ScenarioParams& p) {
  return p.w * std::pow(price, -p.beta) - survivor_supply(theta, price, gamma, p) -
         financial_demand(theta, p);
}

// Maximal farmer supply covers the investor's net demand.
inline bool check_existence(double theta, double gamma, const ScenarioParams& p) {
  return maximal_supply(theta, gamma, p) >= p.alpha * (theta - p.theta0);
}

// Infimum of gamma for which every node admits a finite clearing price.
// The existence condition is linear in gamma, so this is a closed form.
inline double minimum_feasible_gamma(std::span<const double> nodes, const ScenarioParams& p) {
  double floor = 0.0;
  if (p.alpha == 0.0) return floor;
  for (double theta : nodes) {
    if (theta <= p.theta0) continue;
    const double unit_supply = maximal_supply(theta, 1.0, p);
    const double need = p.alpha * (theta - p.theta0);
    if (unit_supply <= 0.0) return std::numeric_limits<double>::infinity();
    floor = std::max(floor, need / unit_supply);
  }
  return floor;
}

namespace detail {

struct PriceBracket {
  double lo;
  double hi;
  double g_lo;
  double g_hi;
};

// Geometric expansion from p = 1 until excess demand changes sign.
template <class Excess>
PriceBracket bracket_price(Excess&& g, double theta, double gamma, const ScenarioParams& p,
                           double cap) {
  double lo = 1.0, hi = 1.0;
  double g_lo = g(1.0), g_hi = g_lo;
  if (g_lo > 0.0) {
    do {
      lo = hi;
      g_lo = g_hi;
      hi *= 2.0;
      if (hi > cap) throw NoEquilibrium(theta, p.alpha, gamma);
      g_hi = g(hi);
    } while (g_hi > 0.0);
  } else {
    do {
      hi = lo;
      g_hi = g_lo;
      lo *= 0.5;
      if (lo < 1.0 / cap) throw ConvergenceFailure("clearing: no lower price bracket", g_hi);
      g_lo = g(lo);
    } while (g_lo <= 0.0);
  }
  return {lo, hi, g_lo, g_hi};
}

inline ClearingPoint finish_point(double theta, double price, double gamma,
                                  const ScenarioParams& p, int iterations) {
  ClearingPoint pt;
  pt.theta = theta;
  pt.price = price;
  pt.theta_star = default_threshold(price, gamma, p);
  pt.q_supply = supply_given_threshold(theta, pt.theta_star, gamma, p);
  pt.q_financial = financial_demand(theta, p);
  pt.iterations = iterations;
  pt.residual = std::abs(p.w * std::pow(price, -p.beta) - pt.q_supply - pt.q_financial);
  return pt;
}

}  // namespace detail

// Unique clearing price for one aggregate realisation. Excess demand is
// strictly decreasing in price (demand falls, survivor supply rises), so the
// root is unique whenever check_existence holds.
inline ClearingPoint solve_price(double theta, double gamma, const ScenarioParams& p,
                                 const ClearingOptions& opts = {}) {
  if (!(gamma > 0.0)) throw DomainError("solve_price: gamma must be positive");
  if (!(opts.tol > 0.0)) throw DomainError("solve_price: tol must be positive");
  if (!check_existence(theta, gamma, p)) throw NoEquilibrium(theta, p.alpha, gamma);

  auto g = [&](double price) { return excess_demand(theta, price, gamma, p); };
  const auto br = detail::bracket_price(g, theta, gamma, p, opts.price_cap);

  if (opts.method == ClearingMethod::fixed_point) {
    // Literal iteration on the inverted demand curve. Non-positive net
    // supply would need a fractional power of a negative number; the
    // iterate is clamped to the bracket instead.
    const double q_s = financial_demand(theta, p);
    double price = std::sqrt(br.lo * br.hi);
    for (int m = 1; m <= opts.max_iterations; ++m) {
      const double net = survivor_supply(theta, price, gamma, p) + q_s;
      double next = net > 0.0 ? std::pow(p.w / net, 1.0 / p.beta) : br.hi;
      if (net <= 0.0) next = std::clamp(next, br.lo, br.hi);
      const double step = std::abs(next - price);
      price = next;
      if (step < opts.tol) return detail::finish_point(theta, price, gamma, p, m);
    }
    throw ConvergenceFailure("clearing: fixed-point iteration did not converge",
                             std::abs(g(price)));
  }

  if (br.g_lo == 0.0) return detail::finish_point(theta, br.lo, gamma, p, 0);
  if (br.g_hi == 0.0) return detail::finish_point(theta, br.hi, gamma, p, 0);

  const double tol = opts.tol;
  auto done = [tol](double a, double b) {
    const double width = std::abs(b - a);
    const double scale = std::min(1.0, std::min(a, b));
    return width <= tol * scale || width <= 4.0 * std::numeric_limits<double>::epsilon() * b;
  };
  std::uintmax_t iters = static_cast<std::uintmax_t>(opts.max_iterations);
  const auto root =
      boost::math::tools::toms748_solve(g, br.lo, br.hi, br.g_lo, br.g_hi, done, iters);
  const double price = 0.5 * (root.first + root.second);
  if (iters >= static_cast<std::uintmax_t>(opts.max_iterations) && !done(root.first, root.second))
    throw ConvergenceFailure("clearing: bracketed solve hit the iteration cap",
                             std::abs(g(price)));
  return detail::finish_point(theta, price, gamma, p, static_cast<int>(iters));
}

}  // namespace agrifin
