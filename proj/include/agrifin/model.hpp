#pragma once

// Scenario parameters, fitness laws and the Gaussian integral primitives
// every population average in the model reduces to.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "agrifin/errors.hpp"

namespace agrifin {

// How ScenarioParams::c_F is expressed.
//   investment_units: c_F multiplies the optimal investment (gamma/2)^2 and is
//                     rescaled every time gamma changes.
//   absolute:         c_F is a fixed amount of capital.
enum class FixedCostBasis { investment_units, absolute };

inline const char* to_string(FixedCostBasis basis) {
  return basis == FixedCostBasis::absolute ? "absolute" : "investment_units";
}

struct ScenarioParams {
  double beta = 0.6;         // demand elasticity
  double w = 0.02;           // demand scale
  double sigma_bar = 0.1;    // aggregate fitness volatility
  double sigma = 0.2;        // idiosyncratic fitness volatility
  double theta0 = 0.5;       // initial fitness
  double c_F = 0.6;          // farmer fixed cost, see fixed_cost_basis
  double c_S = 0.0002;       // financial transaction cost
  double alpha = 0.0;        // market integration
  double tau = 1.0;          // time to produce
  FixedCostBasis fixed_cost_basis = FixedCostBasis::investment_units;

  static ScenarioParams baseline() { return {}; }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw DomainError(std::string("invalid scenario: ") + what);
    };
    const double values[] = {beta, w, sigma_bar, sigma, theta0, c_F, c_S, alpha, tau};
    for (double v : values) require(std::isfinite(v), "parameters must be finite");
    require(beta > 0.0, "beta > 0");
    require(w > 0.0, "w > 0");
    require(sigma_bar >= 0.0, "sigma_bar >= 0");
    require(sigma >= 0.0, "sigma >= 0");
    require(theta0 > 0.0, "theta0 > 0");
    require(c_F >= 0.0, "c_F >= 0");
    require(c_S >= 0.0, "c_S >= 0");
    require(alpha >= 0.0, "alpha >= 0");
    require(tau > 0.0, "tau > 0");
  }

  bool operator==(const ScenarioParams&) const = default;
};

// Optimal investment m = (gamma/2)^2.
inline double optimal_investment(double gamma) { return 0.25 * gamma * gamma; }

// Fixed cost in capital units for the current expectation gamma.
inline double effective_fixed_cost(const ScenarioParams& p, double gamma) {
  return p.fixed_cost_basis == FixedCostBasis::absolute ? p.c_F
                                                        : p.c_F * optimal_investment(gamma);
}

// Marginal laws at the clearing date: aggregate theta_tau ~ N(theta0, sigma_bar^2 tau),
// idiosyncratic theta_tau^i | theta_tau ~ N(theta_tau, sigma^2 tau).
struct FitnessDistributions {
  double aggregate_mean;
  double aggregate_std;
  double idiosyncratic_std;

  static FitnessDistributions from(const ScenarioParams& p) {
    const double root_tau = std::sqrt(p.tau);
    return {p.theta0, p.sigma_bar * root_tau, p.sigma * root_tau};
  }
};

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

// Standard normal CDF.
inline double normal_cdf(double z) {
  if (!std::isfinite(z)) throw DomainError("normal_cdf: non-finite argument");
  return 0.5 * std::erfc(-z * (0.5 * std::numbers::sqrt2));
}

namespace detail {

// 1 - Phi(u), tolerating infinite u.
inline double upper_tail(double u) {
  if (std::isnan(u)) throw DomainError("upper_tail: NaN argument");
  return 0.5 * std::erfc(u * (0.5 * std::numbers::sqrt2));
}

inline double pdf_or_zero(double u) { return std::isinf(u) ? 0.0 : normal_pdf(u); }

inline void require_positive_std(double std_dev, const char* who) {
  if (!(std_dev > 0.0) || !std::isfinite(std_dev))
    throw DomainError(std::string(who) + ": std must be positive and finite");
}

}  // namespace detail

// Upper partial first moment: integral over (a, inf) of x N(x; mean, std^2) dx.
inline double gaussian_partial_moment(double a, double mean, double std_dev) {
  detail::require_positive_std(std_dev, "gaussian_partial_moment");
  const double u = (a - mean) / std_dev;
  return mean * detail::upper_tail(u) + std_dev * detail::pdf_or_zero(u);
}

// Upper partial second moment: integral over (a, inf) of x^2 N(x; mean, std^2) dx.
inline double gaussian_partial_second_moment(double a, double mean, double std_dev) {
  detail::require_positive_std(std_dev, "gaussian_partial_second_moment");
  const double u = (a - mean) / std_dev;
  const double tail = detail::upper_tail(u);
  if (std::isinf(u)) return u < 0 ? mean * mean + std_dev * std_dev : 0.0;
  return (mean * mean + std_dev * std_dev) * tail + std_dev * (a + mean) * normal_pdf(u);
}

// P(X > a) for X ~ N(mean, std^2).
inline double survival_probability(double a, double mean, double std_dev) {
  detail::require_positive_std(std_dev, "survival_probability");
  return detail::upper_tail((a - mean) / std_dev);
}

// Discretisation of the aggregate law used by every E^A average.
struct QuadratureGrid {
  std::vector<double> nodes;    // strictly increasing theta_tau values
  std::vector<double> weights;  // probability mass per node, sums to 1
  double truncation = 4.0;      // half-width in aggregate standard deviations

  std::size_t n_points() const noexcept { return nodes.size(); }

  // Weighted sum sum_k weight_k f(node_k, k), accumulated in node order.
  template <class Fn>
  double expect(Fn&& fn) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * fn(nodes[k], k);
    return acc;
  }
};

// Uniform grid over theta0 +- truncation * sigma_bar sqrt(tau). Each node
// carries density * spacing (piecewise-constant interpolation of the
// integrand), renormalised over the truncated support. A zero aggregate
// volatility collapses the grid to the single node theta0.
inline QuadratureGrid build_grid(const ScenarioParams& p, std::size_t n_points = 133,
                                 double truncation = 4.0) {
  if (n_points < 3) throw DomainError("build_grid: n_points must be >= 3");
  if (!(truncation > 0.0) || !std::isfinite(truncation))
    throw DomainError("build_grid: truncation must be positive");
  const auto laws = FitnessDistributions::from(p);

  QuadratureGrid grid;
  grid.truncation = truncation;
  if (laws.aggregate_std == 0.0) {
    grid.nodes = {laws.aggregate_mean};
    grid.weights = {1.0};
    return grid;
  }

  const double spacing = 2.0 * truncation * laws.aggregate_std / static_cast<double>(n_points - 1);
  const double center = 0.5 * static_cast<double>(n_points - 1);
  grid.nodes.resize(n_points);
  grid.weights.resize(n_points);
  double total = 0.0;
  for (std::size_t k = 0; k < n_points; ++k) {
    // Offsets are exactly antisymmetric about the center, so are the weights.
    const double offset = (static_cast<double>(k) - center) * spacing;
    grid.nodes[k] = laws.aggregate_mean + offset;
    grid.weights[k] = normal_pdf(offset / laws.aggregate_std) / laws.aggregate_std * spacing;
    total += grid.weights[k];
  }
  for (double& wgt : grid.weights) wgt /= total;
  return grid;
}

}  // namespace agrifin
