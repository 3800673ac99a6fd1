#pragma once

// Closed-form single-farmer model: one producer, aggregate uncertainty only,
// price schedule taken from the segmented (alpha = 0) market
//   p(theta) = (2 w / (gamma theta))^(1/beta).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "agrifin/errors.hpp"
#include "agrifin/model.hpp"
#include "agrifin/optimize.hpp"

namespace agrifin {

struct AnalyticSolution {
  double gamma_exact = 0.0;
  double gamma0 = 0.0;
  double gamma1_coef = 0.0;  // odd cumulants vanish for a Gaussian
  double gamma2 = 0.0;
  double x = 0.0;            // sigma_bar sqrt(tau) / theta0
  double A = 0.0;
  double B = 0.0;
  double mu_S_approx = 0.0;
};

// The single farmer faces no idiosyncratic risk, so x uses the aggregate volatility.
inline double relative_volatility(const ScenarioParams& p) {
  return p.sigma_bar * std::sqrt(p.tau) / p.theta0;
}

inline double analytic_gamma0(const ScenarioParams& p) {
  return std::pow(2.0 * p.w, 1.0 / (1.0 + p.beta)) *
         std::pow(p.theta0, (p.beta - 1.0) / (p.beta + 1.0));
}

// Second-order term of the expansion of analytic_gamma in x around 0.
inline double analytic_gamma2(const ScenarioParams& p) {
  const double x = relative_volatility(p);
  return -analytic_gamma0(p) * (p.beta - 1.0) / (2.0 * p.beta * (p.beta + 1.0)) * x * x;
}

// gamma from a second-order cumulant expansion of E[theta^(1 - 1/beta)].
inline double analytic_gamma(const ScenarioParams& p) {
  if (!(p.beta > 0.0)) throw DomainError("analytic_gamma: beta must be positive");
  const double x = relative_volatility(p);
  const double bracket = 1.0 - (1.0 / (2.0 * p.beta)) * (1.0 - 1.0 / p.beta) * x * x;
  if (!(bracket > 0.0))
    throw OutOfValidity("analytic_gamma: cumulant expansion bracket is not positive");
  return analytic_gamma0(p) * std::pow(bracket, p.beta / (p.beta + 1.0));
}

inline double analytic_coefficient_A(const ScenarioParams& p) {
  const double g0 = analytic_gamma0(p);
  return p.alpha * g0 / p.beta - 2.0 * p.alpha * p.alpha / p.beta;
}

inline double analytic_coefficient_B(const ScenarioParams& p) {
  return p.alpha * analytic_gamma0(p) / std::sqrt(2.0 * std::numbers::pi);
}

// Approximate investor return (A x^2 - c_S) / (B x - A x^2 + c_S).
inline double analytic_mu_S(const ScenarioParams& p) {
  const double x = relative_volatility(p);
  const double A = analytic_coefficient_A(p);
  const double B = analytic_coefficient_B(p);
  const double den = B * x - A * x * x + p.c_S;
  if (std::abs(den) < 1e-12) throw SingularDenominator("analytic_mu_S: vanishing denominator");
  return (A * x * x - p.c_S) / den;
}

inline AnalyticSolution analytic_solution(const ScenarioParams& p) {
  AnalyticSolution s;
  s.x = relative_volatility(p);
  s.gamma0 = analytic_gamma0(p);
  s.gamma1_coef = 0.0;
  s.gamma2 = analytic_gamma2(p);
  s.gamma_exact = analytic_gamma(p);
  s.A = analytic_coefficient_A(p);
  s.B = analytic_coefficient_B(p);
  s.mu_S_approx = analytic_mu_S(p);
  return s;
}

// Smaller root of A x^2 = c_S in alpha, i.e. where the approximate return turns positive.
inline std::optional<double> analytic_alpha_c(const ScenarioParams& p) {
  const double x = relative_volatility(p);
  const double g0 = analytic_gamma0(p);
  if (x == 0.0) return std::nullopt;
  const double disc = g0 * g0 - 8.0 * p.beta * p.c_S / (x * x);
  if (disc < 0.0) return std::nullopt;
  return 0.25 * (g0 - std::sqrt(disc));
}

struct AnalyticAlphaStar {
  double alpha = 0.0;
  double mu_S = 0.0;
  bool boundary_maximum = false;
};

// argmax over alpha in (0, alpha_max] of analytic_mu_S. A coarse scan
// localises the maximum, golden-section refines it to `tol`. alpha_max
// defaults to gamma0 / 2, where A (and the return's numerator gain) vanishes.
inline AnalyticAlphaStar analytic_alpha_star(const ScenarioParams& p,
                                             std::optional<double> alpha_max = std::nullopt,
                                             double tol = 1e-6) {
  const double upper = alpha_max.value_or(0.5 * analytic_gamma0(p));
  if (!(upper > 0.0)) throw DomainError("analytic_alpha_star: empty alpha bracket");
  auto mu_at = [&](double a) {
    ScenarioParams q = p;
    q.alpha = a;
    return analytic_mu_S(q);
  };

  constexpr int scan = 400;
  const double step = upper / scan;
  int best = 1;
  double best_mu = mu_at(step);
  for (int i = 2; i <= scan; ++i) {
    const double v = mu_at(step * i);
    if (v > best_mu) {
      best_mu = v;
      best = i;
    }
  }
  const double lo = step * std::max(best - 1, 0);
  const double hi = step * std::min(best + 1, scan);
  const auto opt = golden_section_maximize(
      [&](double a) { return a <= 0.0 ? -std::numeric_limits<double>::infinity() : mu_at(a); },
      std::max(lo, 1e-300), hi, tol);

  AnalyticAlphaStar out;
  out.alpha = opt.x;
  out.mu_S = opt.value;
  out.boundary_maximum = best == 1 || best == scan;
  return out;
}

// Configuration on which the numeric pipeline reduces to the closed form:
// no integration, no fixed cost, no idiosyncratic dispersion.
inline ScenarioParams single_farmer_params(ScenarioParams base) {
  base.alpha = 0.0;
  base.c_F = 0.0;
  base.sigma = 0.0;
  return base;
}

}  // namespace agrifin
