#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "agrifin/metrics.hpp"

using namespace agrifin;

namespace {

// Hand-built schedule on arbitrary nodes with given prices and thresholds.
GammaSolution hand_solution(const ScenarioParams& p, double gamma, std::vector<double> nodes,
                            std::vector<double> weights, std::vector<double> prices,
                            std::vector<double> thresholds) {
  GammaSolution s;
  s.gamma = gamma;
  s.params = p;
  s.schedule.grid.nodes = std::move(nodes);
  s.schedule.grid.weights = std::move(weights);
  s.schedule.prices = prices;
  for (std::size_t k = 0; k < prices.size(); ++k) {
    ClearingPoint pt;
    pt.theta = s.schedule.grid.nodes[k];
    pt.price = prices[k];
    pt.theta_star = thresholds[k];
    pt.q_supply = 0.5 * gamma * gaussian_partial_moment(pt.theta_star, pt.theta, p.sigma);
    pt.q_financial = financial_demand(pt.theta, p);
    s.schedule.points.push_back(pt);
    s.schedule.feasible.push_back(true);
  }
  return s;
}

// First and second moments of one farmer's profit at one aggregate state by
// dense integration over the idiosyncratic draw, split at the threshold.
std::pair<double, double> dense_profit_moments(double theta, double sigma, double theta_star,
                                               double revenue_scale, double M) {
  auto dens = [&](double x) {
    const double u = (x - theta) / sigma;
    return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2 * std::numbers::pi));
  };
  auto integrate = [&](auto f, double lo, double hi) {
    if (hi <= lo) return 0.0L;
    const int n = 200000;
    const double h = (hi - lo) / n;
    long double acc = 0.5L * (f(lo) + f(hi));
    for (int i = 1; i < n; ++i) acc += f(lo + i * h);
    return acc * h;
  };
  const double lo = theta - 12 * sigma, hi = theta + 12 * sigma;
  const double cut = std::clamp(theta_star, lo, hi);
  long double m1 = integrate([&](double x) { return -M * dens(x); }, lo, cut) +
                   integrate([&](double x) { return (revenue_scale * x - M) * dens(x); }, cut, hi);
  long double m2 = integrate([&](double x) { return M * M * dens(x); }, lo, cut) +
                   integrate([&](double x) {
                     const double v = revenue_scale * x - M;
                     return v * v * dens(x);
                   }, cut, hi);
  return {static_cast<double>(m1), static_cast<double>(m2)};
}

}  // namespace

TEST(FarmerMetrics, NoDefaultWithoutIdiosyncraticRiskOrCost) {
  auto p = ScenarioParams::baseline();
  p.sigma = 0.0;
  p.c_F = 0.0;
  const double gamma = 0.2;
  GammaSolution s;
  s.gamma = gamma;
  s.params = p;
  s.schedule.grid.nodes = {0.4, 0.5, 0.6};
  s.schedule.grid.weights = {0.25, 0.5, 0.25};
  s.schedule.prices = {1.2, 1.0, 0.8};
  for (int k = 0; k < 3; ++k) {
    ClearingPoint pt;
    pt.theta = s.schedule.grid.nodes[k];
    pt.price = s.schedule.prices[k];
    pt.theta_star = 0.0;
    pt.q_supply = 0.5 * gamma * pt.theta;
    s.schedule.points.push_back(pt);
    s.schedule.feasible.push_back(true);
  }
  const auto [d, dstd] = compute_default_fraction(s, p);
  EXPECT_EQ(d, 0.0);
  EXPECT_EQ(dstd, 0.0);
  const auto f = compute_farmer_metrics(s, p);
  const double M = 0.01;
  const double revenue = 0.25 * 0.1 * 1.2 * 0.4 + 0.5 * 0.1 * 1.0 * 0.5 + 0.25 * 0.1 * 0.8 * 0.6;
  EXPECT_NEAR(f.M_F, M, 1e-17);
  EXPECT_NEAR(f.pi_F, revenue - M, 1e-15);
  EXPECT_NEAR(f.mu_F, (revenue - M) / M, 1e-12);
}

TEST(FarmerMetrics, EveryoneDefaultsGivesMinusOne) {
  const auto p = ScenarioParams::baseline();
  const auto s = hand_solution(p, 0.18, {0.45, 0.5, 0.55}, {0.3, 0.4, 0.3}, {1e-3, 1e-3, 1e-3},
                               {100.0, 100.0, 100.0});
  const auto f = compute_farmer_metrics(s, p);
  EXPECT_NEAR(f.mu_F, -1.0, 1e-12);
  EXPECT_NEAR(f.sigma_F, 0.0, 1e-9);
  EXPECT_NEAR(compute_default_fraction(s, p).first, 1.0, 1e-12);
}

TEST(FarmerMetrics, JointDispersionMatchesDenseIntegration) {
  const auto p = ScenarioParams::baseline();
  const double gamma = 0.18;
  const std::vector<double> nodes{0.4, 0.5, 0.6}, weights{0.2, 0.5, 0.3}, prices{1.3, 1.0, 0.85};
  std::vector<double> thresholds;
  for (double pr : prices) thresholds.push_back(default_threshold(pr, gamma, p));
  const auto s = hand_solution(p, gamma, nodes, weights, prices, thresholds);
  const auto f = compute_farmer_metrics(s, p);

  const double M = 0.25 * gamma * gamma * (1 + p.c_F);
  double m1 = 0, m2 = 0, agg1 = 0, agg2 = 0;
  for (int k = 0; k < 3; ++k) {
    const auto [a, b] = dense_profit_moments(nodes[k], p.sigma, thresholds[k], 0.5 * gamma * prices[k], M);
    m1 += weights[k] * a;
    m2 += weights[k] * b;
    agg1 += weights[k] * a;
    agg2 += weights[k] * a * a;
  }
  EXPECT_NEAR(f.M_F, M, 1e-16);
  EXPECT_NEAR(f.pi_F, m1, 1e-9);
  EXPECT_NEAR(f.sigma_F, std::sqrt(m2 - m1 * m1) / M, 1e-6);
  EXPECT_NEAR(f.sigma_F_aggregate, std::sqrt(agg2 - agg1 * agg1) / M, 1e-6);
  EXPECT_LE(f.sigma_F_aggregate, f.sigma_F);
}

TEST(EquilibriumMetrics, ConstantPriceHasZeroPriceDispersion) {
  const auto p = ScenarioParams::baseline();
  const auto s = hand_solution(p, 0.18, {0.4, 0.5, 0.6}, {0.25, 0.5, 0.25}, {0.9, 0.9, 0.9},
                               {0.3, 0.3, 0.3});
  const auto m = compute_metrics(s, p);
  EXPECT_EQ(m.price_mean, 0.9);
  EXPECT_EQ(m.price_std, 0.0);
}

TEST(InvestorMetrics, HandScheduleClosedForm) {
  auto p = ScenarioParams::baseline();
  p.alpha = 0.1;
  const std::vector<double> nodes{0.4, 0.5, 0.6}, weights{0.25, 0.5, 0.25}, prices{1.2, 1.0, 0.8};
  const auto s = hand_solution(p, 0.18, nodes, weights, prices, {0.3, 0.3, 0.3});
  const auto inv = compute_investor_metrics(s, p);
  // Profits: 0.01*1.2 - c_S, -c_S, -0.01*0.8 - c_S.
  const double pi[3] = {0.012 - 2e-4, -2e-4, -0.008 - 2e-4};
  const double mean = 0.25 * pi[0] + 0.5 * pi[1] + 0.25 * pi[2];
  const double var = 0.25 * std::pow(pi[0] - mean, 2) + 0.5 * std::pow(pi[1] - mean, 2) +
                     0.25 * std::pow(pi[2] - mean, 2);
  const double M = 0.25 * (0.012 + 2e-4);
  EXPECT_NEAR(inv.pi_S, mean, 1e-17);
  EXPECT_NEAR(inv.M_S, M, 1e-17);
  EXPECT_NEAR(inv.mu_S, mean / M, 1e-13);
  EXPECT_NEAR(inv.sigma_S, std::sqrt(var) / M, 1e-12);
  EXPECT_FALSE(inv.degenerate);
}

TEST(InvestorMetrics, NoTradingAndNoCostIsDegenerate) {
  auto p = ScenarioParams::baseline();
  p.c_S = 0.0;
  const auto g = build_grid(p);
  const auto sol = solve_gamma(p, g);
  const auto inv = compute_investor_metrics(sol, p);
  EXPECT_EQ(inv.pi_S, 0.0);
  EXPECT_EQ(inv.M_S, 0.0);
  EXPECT_TRUE(inv.degenerate);
  EXPECT_TRUE(std::isnan(inv.mu_S));
}

TEST(InvestorMetrics, NoTradingWithCostLosesTheCost) {
  const auto p = ScenarioParams::baseline();
  const auto sol = solve_gamma(p, build_grid(p));
  const auto inv = compute_investor_metrics(sol, p);
  EXPECT_TRUE(inv.degenerate);
  const double below = sol.schedule.grid.expect(
      [&](double theta, std::size_t) { return theta < p.theta0 ? 1.0 : 0.0; });
  EXPECT_NEAR(inv.M_S, p.c_S * below, 1e-18);
  EXPECT_NEAR(inv.mu_S, -1.0 / below, 1e-12);
  EXPECT_NEAR(inv.pi_S, -p.c_S, 1e-18);
}

TEST(InvestorMetrics, CapitalCoversTheTransactionCost) {
  for (double a : {0.02, 0.08, 0.15}) {
    auto p = ScenarioParams::baseline();
    p.alpha = a;
    const auto sol = solve_gamma(p, build_grid(p));
    const auto inv = compute_investor_metrics(sol, p);
    const double below = sol.schedule.grid.expect(
        [&](double theta, std::size_t) { return theta < p.theta0 ? 1.0 : 0.0; });
    EXPECT_GE(inv.M_S, p.c_S * below);
    EXPECT_GE(inv.mu_S, -1.0);
  }
}

TEST(InvestorMetrics, ZeroNetSupplyOnSymmetricGrid) {
  auto p = ScenarioParams::baseline();
  p.alpha = 0.3;
  EXPECT_NEAR(mean_financial_position(build_grid(p), p), 0.0, 1e-15);
  EXPECT_NEAR(mean_financial_position(build_grid(p, 266, 5.0), p), 0.0, 1e-15);
}

TEST(ComputeMetrics, NaiveEqualsRationalWithoutTrading) {
  const auto p = ScenarioParams::baseline();
  const auto g = build_grid(p);
  const auto sol = solve_gamma(p, g);
  const auto r = compute_metrics(sol, p, FarmerMode::rational);
  const auto n = compute_metrics(sol, p, FarmerMode::naive);
  EXPECT_EQ(r.gamma, n.gamma);
  EXPECT_EQ(r.price_std, n.price_std);
  EXPECT_EQ(r.mu_F, n.mu_F);
  EXPECT_EQ(r.default_frac, n.default_frac);
}

TEST(ComputeMetrics, RejectsMismatchedSolutions) {
  auto p = ScenarioParams::baseline();
  const auto g = build_grid(p);
  const auto seg = solve_gamma(p, g);
  p.alpha = 0.1;
  EXPECT_THROW(compute_metrics(seg, p, FarmerMode::rational), DomainError);
  const auto integ = solve_gamma(p, g);
  EXPECT_THROW(compute_metrics(integ, p, FarmerMode::naive), DomainError);
  EXPECT_NO_THROW(compute_metrics(seg, p, FarmerMode::naive));
}

TEST(ComputeMetrics, BaselineLevels) {
  const auto p = ScenarioParams::baseline();
  const auto m = compute_metrics(solve_gamma(p, build_grid(p)), p);
  EXPECT_NEAR(m.gamma, 0.18, 0.005);
  EXPECT_GT(m.default_frac, 0.25);
  EXPECT_LT(m.default_frac, 0.35);
  EXPECT_GT(m.price_std, 0.0);
  EXPECT_GE(m.default_frac, 0.0);
  EXPECT_LE(m.default_frac, 1.0);
}

TEST(ComputeMetrics, QuantityDispersionRisesWithIntegration) {
  double prev = -1.0, q0 = 0.0;
  for (double a : {0.0, 0.04, 0.08, 0.12, 0.16, 0.2}) {
    auto p = ScenarioParams::baseline();
    p.alpha = a;
    const auto m = compute_metrics(solve_gamma(p, build_grid(p)), p);
    if (a == 0.0) q0 = m.q_mean;
    EXPECT_GT(m.q_std, prev) << a;
    EXPECT_LT(std::abs(m.q_mean - q0) / q0, 0.10) << a;
    prev = m.q_std;
  }
}
