#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "agrifin/analytic.hpp"
#include "agrifin/expectation.hpp"

using namespace agrifin;

namespace {

ScenarioParams at_x(double x, ScenarioParams p = ScenarioParams::baseline()) {
  p.sigma_bar = x * p.theta0 / std::sqrt(p.tau);
  return p;
}

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace

TEST(AnalyticGamma, LeadingOrderValue) {
  const auto p = ScenarioParams::baseline();
  const double oracle = std::exp((std::log(2 * p.w) + (p.beta - 1) * std::log(p.theta0)) / (1 + p.beta));
  EXPECT_NEAR(analytic_gamma0(p), oracle, 1e-15);
  EXPECT_NEAR(analytic_gamma0(p), 0.1590, 5e-4);
}

TEST(AnalyticGamma, UnitElasticityIgnoresFitness) {
  auto p = ScenarioParams::baseline();
  p.beta = 1.0;
  for (double th : {0.2, 0.5, 3.0}) {
    p.theta0 = th;
    EXPECT_NEAR(analytic_gamma0(p), std::sqrt(2 * p.w), 1e-15);
  }
  EXPECT_EQ(analytic_gamma2(p), 0.0);
}

TEST(AnalyticGamma, SecondOrderSign) {
  auto p = at_x(0.1);
  p.beta = 0.6;
  EXPECT_GT(analytic_gamma2(p), 0.0);
  p.beta = 1.5;
  EXPECT_LT(analytic_gamma2(p), 0.0);
  EXPECT_EQ(analytic_solution(at_x(0.1)).gamma1_coef, 0.0);
  EXPECT_EQ(analytic_gamma2(at_x(0.0)), 0.0);
}

TEST(AnalyticGamma, TruncationErrorIsFourthOrder) {
  std::vector<double> xs, errs;
  for (double x = 0.01; x <= 0.0401; x += 0.005) {
    const auto p = at_x(x);
    xs.push_back(x);
    errs.push_back(std::abs(analytic_gamma(p) - analytic_gamma0(p) - analytic_gamma2(p)));
  }
  EXPECT_NEAR(slope(xs, errs), 4.0, 0.3);
}

TEST(AnalyticGamma, AgreesWithNumericSingleFarmer) {
  for (double x : {0.01, 0.02, 0.05, 0.08, 0.1}) {
    const auto p = single_farmer_params(at_x(x));
    const double num = solve_gamma(p, build_grid(p)).gamma;
    const double ana = analytic_gamma(p);
    EXPECT_LT(std::abs(num - ana) / ana, 0.01) << x;
  }
}

TEST(AnalyticGamma, OutsideValidityThrows) {
  auto p = at_x(3.0);
  p.beta = 2.0;
  EXPECT_THROW(analytic_gamma(p), OutOfValidity);
  EXPECT_THROW(analytic_solution(p), OutOfValidity);
}

TEST(AnalyticMuS, MinusOneWithoutVolatilityOrTrading) {
  auto p = at_x(0.0);
  p.alpha = 0.05;
  EXPECT_EQ(analytic_mu_S(p), -1.0);
  p = at_x(0.1);
  p.alpha = 0.0;
  EXPECT_EQ(analytic_mu_S(p), -1.0);
}

TEST(AnalyticMuS, ClosedFormPieces) {
  auto p = at_x(0.1);
  p.alpha = 0.03;
  const double g0 = analytic_gamma0(p);
  const double A = 0.03 * g0 / 0.6 - 2 * 0.03 * 0.03 / 0.6;
  const double B = 0.03 * g0 / std::sqrt(2 * std::acos(-1.0));
  EXPECT_NEAR(analytic_coefficient_A(p), A, 1e-16);
  EXPECT_NEAR(analytic_coefficient_B(p), B, 1e-16);
  EXPECT_NEAR(analytic_mu_S(p), (A * 0.01 - p.c_S) / (B * 0.1 - A * 0.01 + p.c_S), 1e-13);
}

TEST(AnalyticMuS, VanishingDenominatorThrows) {
  auto p = at_x(0.1);
  p.alpha = 0.0;
  p.c_S = 0.0;
  EXPECT_THROW(analytic_mu_S(p), SingularDenominator);
}

TEST(AnalyticAlpha, NumeratorPeaksAtQuarterGamma0) {
  auto p = at_x(0.1);
  const double g0 = analytic_gamma0(p);
  double best_a = 0, best = -INFINITY;
  for (int i = 1; i <= 100000; ++i) {
    p.alpha = 0.5 * g0 * i / 100000;
    const double v = analytic_coefficient_A(p);
    if (v > best) {
      best = v;
      best_a = p.alpha;
    }
  }
  EXPECT_NEAR(best_a, g0 / 4, 1e-5);
}

TEST(AnalyticAlpha, CriticalAlphaZeroesTheReturn) {
  auto p = at_x(0.2);
  const auto ac = analytic_alpha_c(p);
  ASSERT_TRUE(ac.has_value());
  p.alpha = *ac;
  EXPECT_NEAR(analytic_mu_S(p), 0.0, 1e-9);
  p.alpha = *ac * 0.9;
  EXPECT_LT(analytic_mu_S(p), 0.0);
  p.alpha = *ac * 1.1;
  EXPECT_GT(analytic_mu_S(p), 0.0);
  EXPECT_FALSE(analytic_alpha_c(at_x(0.0)).has_value());
  EXPECT_FALSE(analytic_alpha_c(at_x(0.001)).has_value());  // cost never recovered
}

TEST(AnalyticAlpha, StarMaximisesTheReturn) {
  const auto p = at_x(0.2);
  const auto star = analytic_alpha_star(p);
  EXPECT_FALSE(star.boundary_maximum);
  EXPECT_GT(star.alpha, *analytic_alpha_c(p));
  auto q = p;
  for (double a = 0.001; a < 0.5 * analytic_gamma0(p); a += 0.0005) {
    q.alpha = a;
    EXPECT_LE(analytic_mu_S(q), star.mu_S + 1e-12) << a;
  }
}

TEST(AnalyticAlpha, WithoutCostTheMaximumSitsAtTheBoundary) {
  auto p = at_x(0.2);
  p.c_S = 0.0;
  EXPECT_TRUE(analytic_alpha_star(p).boundary_maximum);
}
