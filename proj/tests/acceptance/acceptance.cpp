// Acceptance run at the baseline scenario. One PASS/FAIL line per
// criterion, indented lines for the parts it is made of. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "agrifin/agrifin.hpp"
#include "agrifin/io/report.hpp"

using namespace agrifin;

namespace {

struct Part {
  std::string label;
  bool ok;
  std::string detail;
};

int failures = 0;
std::vector<std::string> notes;

void report(int id, const std::string& title, const std::vector<Part>& parts) {
  bool ok = true;
  for (const auto& p : parts) ok = ok && p.ok;
  if (!ok) ++failures;
  std::printf("CRITERION %d %s: %s\n", id, ok ? "PASS" : "FAIL", title.c_str());
  for (const auto& p : parts)
    std::printf("    %-4s %s: %s\n", p.ok ? "ok" : "FAIL", p.label.c_str(), p.detail.c_str());
  for (const auto& n : notes) std::printf("    info %s\n", n.c_str());
  notes.clear();
  std::fflush(stdout);
}

// Diagnostics, printed under the next criterion line.
void info(const std::string& s) { notes.push_back(s); }

std::string fmt(const char* f, double a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}
std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}
double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SweepSpec baseline_spec(unsigned threads) {
  SweepSpec s;
  s.base = ScenarioParams::baseline();
  s.values = alpha_values(60, default_alpha_max(s.base));
  s.mode = SweepMode::both;
  s.threads = threads;
  return s;
}

// Rows strictly after alpha_c, rational and naive present.
std::vector<const SweepRow*> beyond(const SweepResult& r, double alpha_c) {
  std::vector<const SweepRow*> out;
  for (const auto& row : r.rows)
    if (row.value > alpha_c && row.rational) out.push_back(&row);
  return out;
}

}  // namespace

int main() {
  const auto base = ScenarioParams::baseline();
  const auto grid = build_grid(base);

  const auto t_sweep = std::chrono::steady_clock::now();
  const auto sweep = run_sweep(baseline_spec(0));
  const double sweep_seconds = seconds_since(t_sweep);
  std::printf("baseline sweep: %zu alpha values on [0, %.6f), %zu feasible\n", sweep.rows.size(),
              sweep.spec.values.back() * 60.0 / 59.0, sweep.feasible_rows());

  // 1. Default rate level and stability, runtime.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = solve_gamma(base, grid);
    const auto m = compute_metrics(sol, base);
    const double solve_seconds = seconds_since(t0);
    double lo = INFINITY, hi = -INFINITY, lo_at = NAN, hi_at = NAN;
    for (const auto& row : sweep.rows) {
      if (!row.rational) continue;
      if (row.rational->default_frac < lo) {
        lo = row.rational->default_frac;
        lo_at = row.value;
      }
      if (row.rational->default_frac > hi) {
        hi = row.rational->default_frac;
        hi_at = row.value;
      }
    }
    report(1, "default fraction about 0.30 and nearly constant in alpha; runtime",
           {{"level", std::abs(m.default_frac - 0.30) <= 0.05,
             fmt("default fraction %.5f at alpha=0, target 0.30 +- 0.05", m.default_frac)},
            {"variation", hi - lo < 0.05,
             fmt("max - min = %.5f over the sweep (min at alpha=%.4f, ", hi - lo, lo_at) +
                 fmt("max at alpha=%.4f), limit 0.05", hi_at)},
            {"solve time", solve_seconds < 1.0, fmt("%.4f s for one scenario, limit 1 s", solve_seconds)},
            {"sweep time", sweep_seconds < 60.0 && sweep.rows.size() >= 50,
             fmt("%.3f s for %.0f points (both modes), limit 60 s", sweep_seconds,
                 static_cast<double>(sweep.rows.size()))}});
  }

  // 2. Market B calibration and the volatility contrast.
  {
    std::vector<Part> parts;
    ScenarioParams market_b;
    try {
      const auto c = calibrate_market_B(base, 0.02, 2.0);
      market_b = c.params;
      parts.push_back({"calibration", std::abs(c.default_frac - 0.02) <= 0.005,
                       fmt("w=%.6g reaches default fraction %.5f, target 0.02 +- 0.005", c.params.w,
                           c.default_frac)});
    } catch (const CalibrationFailure& e) {
      market_b = market_b_params(base, e.closest_w(), 2.0);
      parts.push_back({"calibration", false,
                       fmt("unreachable; closest default fraction %.5f at w=%.6g", e.closest_default(),
                           e.closest_w()) +
                           " (contrast below uses that w)"});
    }
    SweepSpec spec_b = baseline_spec(0);
    spec_b.mode = SweepMode::rational;
    spec_b.base = market_b;
    spec_b.base.alpha = 0.0;
    const auto rb = run_sweep(spec_b);
    const auto rel_a = relative_quantity_volatility(sweep);
    const auto rel_b = relative_quantity_volatility(rb);
    std::size_t compared = 0, violations = 0;
    double worst_margin = INFINITY;
    for (std::size_t i = 1; i < rel_a.size(); ++i) {
      if (!std::isfinite(rel_a[i]) || !std::isfinite(rel_b[i])) continue;
      ++compared;
      worst_margin = std::min(worst_margin, rel_a[i] - rel_b[i]);
      if (!(rel_a[i] > rel_b[i])) ++violations;
    }
    parts.push_back({"sigma_Q contrast", compared > 0 && violations == 0,
                     fmt("A above B at %.0f of %.0f alpha > 0; ", static_cast<double>(compared - violations),
                         static_cast<double>(compared)) +
                         fmt("final ratio A %.4f vs B %.4f", rel_a.back(), rel_b.back())});
    report(2, "Market B at 2% default, Market A's quantity volatility grows faster", parts);
  }

  // 3. Fixed-point solver fidelity.
  {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 10000.0);
    std::vector<double> starts(20);
    for (auto& s : starts) do s = u(rng); while (!(s > 0.0));
    const auto ms = solve_gamma_multistart(base, grid, starts);
    double worst_residual = 0.0;
    for (double s : starts) worst_residual = std::max(worst_residual, solve_gamma(base, grid, s).residual);
    const double g133 = ms.solution.gamma;
    const double g266 = solve_gamma(base, build_grid(base, 266)).gamma;
    report(3, "random starts agree, residual small, grid converged",
           {{"multistart", ms.failures == 0 && ms.spread < 1e-6,
             fmt("spread %.3g over 20 starts, %.0f failures, limit 1e-6", ms.spread,
                 static_cast<double>(ms.failures))},
            {"residual", worst_residual < 1e-7, fmt("max |gamma - F(gamma)| = %.3g, limit 1e-7", worst_residual)},
            {"refinement", std::abs(g133 - g266) / g133 < 0.01,
             fmt("gamma %.10f (133) vs %.10f (266), ", g133, g266) +
                 fmt("relative change %.3g, limit 0.01", std::abs(g133 - g266) / g133)}});
  }

  // 4. Closed-form single-farmer oracle.
  {
    double worst = 0.0, worst_x = NAN;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 21;
    for (int i = 0; i < n; ++i) {
      const double x = 1e-3 * std::pow(100.0, static_cast<double>(i) / (n - 1));
      auto p = single_farmer_params(base);
      p.sigma_bar = x * p.theta0 / std::sqrt(p.tau);
      const double num = solve_gamma(p, build_grid(p)).gamma;
      const double ana = analytic_gamma(p);
      if (std::abs(num - ana) / ana > worst) {
        worst = std::abs(num - ana) / ana;
        worst_x = x;
      }
      const double err = std::abs(ana - analytic_gamma0(p) - analytic_gamma2(p));
      sx += std::log(x);
      sy += std::log(err);
      sxx += std::log(x) * std::log(x);
      sxy += std::log(x) * std::log(err);
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    report(4, "numeric single farmer matches the closed form",
           {{"gamma", worst < 0.01,
             fmt("max relative gap %.3g at x=%.4g over x in [1e-3, 1e-1], limit 0.01", worst, worst_x)},
            {"truncation order", std::abs(slope - 4.0) <= 0.3,
             fmt("log-log slope %.4f, expected 4 +- 0.3", slope)}});
  }

  // 5. Shape suite.
  {
    std::vector<Part> parts;
    using M = EquilibriumMetrics;
    auto rational = [&](double M::*field) {
      std::vector<std::pair<double, double>> s;
      for (const auto& row : sweep.rows)
        if (row.rational) s.emplace_back(row.value, (*row.rational).*field);
      return s;
    };

    // (a)
    {
      auto p0 = base, p4 = base;
      p4.alpha = 0.4;
      const auto s0 = solve_gamma(p0, grid).schedule;
      const auto s4 = solve_gamma(p4, grid).schedule;
      bool decreasing = true;
      for (std::size_t k = 1; k < s0.prices.size(); ++k) decreasing = decreasing && s0.prices[k] < s0.prices[k - 1];
      auto range = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
      };
      const double r0 = range(s0.prices), r4 = range(s4.prices);
      parts.push_back({"(a) price schedule", decreasing && r4 < r0,
                       std::string(decreasing ? "strictly decreasing at alpha=0; " : "NOT decreasing at alpha=0; ") +
                           fmt("price range %.4f at alpha=0 vs %.4f at alpha=0.4", r0, r4)});
      // Diagnostic: the smoothing regime inside the feasible sweep.
      double best_alpha = 0, best_range = r0;
      for (const auto& row : sweep.rows) {
        if (row.value == 0.0) continue;
        auto p = base;
        p.alpha = row.value;
        const double r = range(solve_gamma(p, grid).schedule.prices);
        if (r < best_range) {
          best_range = r;
          best_alpha = row.value;
        }
      }
      info(fmt("(a) narrowest price range in the sweep: %.4f at alpha=%.4f", best_range, best_alpha));
    }

    // (b)
    {
      const auto s = rational(&M::price_std);
      double worst = 0, where = NAN;
      for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].second - s[i - 1].second > worst) {
          worst = s[i].second - s[i - 1].second;
          where = s[i].first;
        }
      std::size_t min_i = 0;
      for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].second < s[min_i].second) min_i = i;
      parts.push_back({"(b) price_std nonincreasing", worst <= 0.0,
                       worst <= 0.0 ? fmt("from %.5f to %.5f", s.front().second, s.back().second)
                                    : fmt("largest rise %.3g at alpha=%.4f", worst, where) +
                                          fmt("; minimum %.5f at alpha=%.4f", s[min_i].second, s[min_i].first)});
    }

    // (c)
    {
      const bool have_c = sweep.alpha_c && sweep.alpha_c_status == "found";
      const auto& first = sweep.rows.front().rational;
      const bool negative_small = first && (first->investor_degenerate ? base.c_S > 0 : first->mu_S < 0);
      std::size_t after = 0, nonpositive = 0;
      double first_bad = NAN;
      if (have_c)
        for (const auto* row : beyond(sweep, *sweep.alpha_c)) {
          ++after;
          if (!(row->rational->mu_S > 0)) {
            if (nonpositive == 0) first_bad = row->value;
            ++nonpositive;
          }
        }
      const bool interior = sweep.alpha_star && sweep.alpha_star->interior &&
                            have_c && *sweep.alpha_c < sweep.alpha_star->alpha;
      std::string d = have_c ? fmt("alpha_c=%.6f", *sweep.alpha_c) : "alpha_c " + sweep.alpha_c_status;
      if (sweep.alpha_star)
        d += fmt(", alpha*=%.6f (mu_S %.5f)", sweep.alpha_star->alpha, sweep.alpha_star->mu_S);
      d += fmt("; mu_S > 0 at %.0f of %.0f sweep alpha beyond alpha_c",
               static_cast<double>(after - nonpositive), static_cast<double>(after));
      if (nonpositive) d += fmt(", first nonpositive at alpha=%.4f", first_bad);
      parts.push_back({"(c) investor return", negative_small && have_c && nonpositive == 0 && interior, d});
    }

    // (d)
    {
      std::size_t rises = 0, pairs = 0;
      double min_sf = INFINITY, min_at = NAN;
      if (sweep.alpha_c) {
        const auto rows = beyond(sweep, *sweep.alpha_c);
        for (std::size_t i = 1; i < rows.size(); ++i) {
          ++pairs;
          if (rows[i]->rational->sigma_F > rows[i - 1]->rational->sigma_F) ++rises;
        }
      }
      for (const auto& row : sweep.rows)
        if (row.rational && row.rational->sigma_F < min_sf) {
          min_sf = row.rational->sigma_F;
          min_at = row.value;
        }
      parts.push_back({"(d) sigma_F increasing beyond alpha_c", pairs > 0 && rises == pairs,
                       fmt("%.0f of %.0f consecutive steps rise; ", static_cast<double>(rises),
                           static_cast<double>(pairs)) +
                           fmt("joint sigma_F minimum %.5f at alpha=%.4f", min_sf, min_at)});
      double min_agg = INFINITY, agg_at = NAN;
      for (const auto& row : sweep.rows)
        if (row.rational && row.rational->sigma_F_aggregate < min_agg) {
          min_agg = row.rational->sigma_F_aggregate;
          agg_at = row.value;
        }
      info(fmt("(d) aggregate-only sigma_F minimum %.5f at alpha=%.4f", min_agg, agg_at));
    }

    // (e)
    {
      std::size_t below = 0, total = 0;
      double first_bad = NAN;
      if (sweep.alpha_c)
        for (const auto* row : beyond(sweep, *sweep.alpha_c)) {
          if (!row->naive) continue;
          ++total;
          if (row->naive->mu_F < row->rational->mu_F) ++below;
          else if (std::isnan(first_bad)) first_bad = row->value;
        }
      std::string d = fmt("naive below rational at %.0f of %.0f alpha beyond alpha_c",
                          static_cast<double>(below), static_cast<double>(total));
      if (!std::isnan(first_bad)) d += fmt("; first reversal at alpha=%.4f", first_bad);
      parts.push_back({"(e) naive farmers earn less", total > 0 && below == total, d});
    }

    // (f)
    {
      const auto qm = rational(&M::q_mean);
      const auto qs = rational(&M::q_std);
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& [a, v] : qm) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      bool increasing = true;
      for (std::size_t i = 1; i < qs.size(); ++i) increasing = increasing && qs[i].second > qs[i - 1].second;
      const double spread = (hi - lo) / qm.front().second;
      parts.push_back({"(f) quantity moments", spread < 0.10 && increasing,
                       fmt("q_mean spread %.4f of its alpha=0 value (limit 0.10); ", spread) +
                           (increasing ? "q_std strictly increasing" : "q_std NOT strictly increasing")});
    }
    report(5, "shape suite", parts);
  }

  // 6. Conservation and consistency.
  {
    double residual = 0.0, residual_at = NAN, net = 0.0;
    for (double a : sweep.spec.values) {
      auto p = base;
      p.alpha = a;
      const auto s = solve_gamma(p, grid).schedule;
      if (s.max_residual() > residual) {
        residual = s.max_residual();
        residual_at = a;
      }
      net = std::max(net, std::abs(mean_financial_position(grid, p)));
    }
    double wsum = 0.0;
    for (double w : grid.weights) wsum += w;
    auto p0 = base;
    p0.alpha = 0.0;
    const double mu0 = analytic_mu_S(p0);
    report(6, "clearing, zero net supply, weights, no-trading limit",
           {{"clearing residual", residual < 1e-6,
             fmt("max %.3g over all nodes and sweep alpha (at alpha=%.4f), limit 1e-6", residual, residual_at)},
            {"zero net supply", net <= 1e-12, fmt("max |mean Q_S| = %.3g, limit 1e-12", net)},
            {"weights", std::abs(wsum - 1.0) <= 1e-12, fmt("|sum - 1| = %.3g, limit 1e-12", std::abs(wsum - 1.0))},
            {"analytic mu_S at alpha=0", mu0 == -1.0, fmt("%.17g, expected exactly -1", mu0)}});
  }

  // 7. Determinism.
  {
    auto serialise = [](const SweepResult& r) {
      return io::sweep_table(r).str() + io::sweep_summary(r).dump();
    };
    const auto one = serialise(run_sweep(baseline_spec(1)));
    const auto four = serialise(run_sweep(baseline_spec(4)));
    const auto again = serialise(run_sweep(baseline_spec(4)));
    const auto automatic = serialise(sweep);
    report(7, "serialized sweep independent of thread count",
           {{"1 vs 4 threads", one == four, fmt("%.0f bytes each", static_cast<double>(one.size()))},
            {"repeat", four == again, "two 4-thread runs"},
            {"auto threads", automatic == one, "hardware concurrency vs 1 thread"}});
  }

  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
