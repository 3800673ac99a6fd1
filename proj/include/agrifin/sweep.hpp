#pragma once

// Comparative statics over one parameter, detection of the investor's
// break-even and optimal integration levels, and the Market B calibration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "agrifin/errors.hpp"
#include "agrifin/expectation.hpp"
#include "agrifin/metrics.hpp"
#include "agrifin/model.hpp"
#include "agrifin/optimize.hpp"
#include "agrifin/parallel.hpp"

namespace agrifin {

enum class SweptParameter { alpha, beta, sigma_bar, w };
enum class SweepMode { rational, naive, both };

inline const char* to_string(SweptParameter s) {
  switch (s) {
    case SweptParameter::beta: return "beta";
    case SweptParameter::sigma_bar: return "sigma_bar";
    case SweptParameter::w: return "w";
    default: return "alpha";
  }
}

inline const char* to_string(SweepMode m) {
  switch (m) {
    case SweepMode::rational: return "rational";
    case SweepMode::naive: return "naive";
    default: return "both";
  }
}

inline bool includes(SweepMode m, FarmerMode f) {
  return m == SweepMode::both || (f == FarmerMode::rational) == (m == SweepMode::rational);
}

struct GridConfig {
  std::size_t n_points = 133;
  double truncation = 4.0;

  bool operator==(const GridConfig&) const = default;
};

struct SweepSpec {
  ScenarioParams base;
  SweptParameter swept = SweptParameter::alpha;
  std::vector<double> values;
  SweepMode mode = SweepMode::both;
  GridConfig grid;
  SolverOptions solver;
  double gamma_guess = 1.0;
  unsigned threads = 1;  // 0 = hardware concurrency

  void validate() const {
    if (values.empty()) throw DomainError("sweep: no values");
    for (std::size_t i = 1; i < values.size(); ++i)
      if (!(values[i] > values[i - 1])) throw DomainError("sweep: values must be strictly increasing");
    for (double v : values) {
      if (!std::isfinite(v)) throw DomainError("sweep: values must be finite");
      if (swept == SweptParameter::alpha || swept == SweptParameter::sigma_bar) {
        if (v < 0.0) throw DomainError(std::string("sweep: ") + to_string(swept) + " must be >= 0");
      } else if (!(v > 0.0)) {
        throw DomainError(std::string("sweep: ") + to_string(swept) + " must be > 0");
      }
    }
  }
};

inline ScenarioParams with_value(ScenarioParams p, SweptParameter s, double v) {
  switch (s) {
    case SweptParameter::alpha: p.alpha = v; break;
    case SweptParameter::beta: p.beta = v; break;
    case SweptParameter::sigma_bar: p.sigma_bar = v; break;
    case SweptParameter::w: p.w = v; break;
  }
  return p;
}

struct SweepRow {
  double value = 0.0;
  ScenarioParams params;
  std::optional<EquilibriumMetrics> rational;
  std::optional<EquilibriumMetrics> naive;
  std::string rational_error;
  std::string naive_error;

  const std::optional<EquilibriumMetrics>& get(FarmerMode m) const {
    return m == FarmerMode::rational ? rational : naive;
  }
  bool feasible(SweepMode mode) const {
    return (!includes(mode, FarmerMode::rational) || rational) &&
           (!includes(mode, FarmerMode::naive) || naive);
  }
};

// A swept value whose solve failed. theta is the offending node, NaN when
// the failure was not tied to a node (convergence).
struct InfeasiblePoint {
  double value = 0.0;
  double theta = std::numeric_limits<double>::quiet_NaN();
  FarmerMode mode = FarmerMode::rational;
  std::string reason;
};

struct AlphaStar {
  double alpha = 0.0;
  double mu_S = 0.0;
  std::size_t grid_index = 0;
  bool interior = false;  // grid maximum has lower neighbours on both sides
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepRow> rows;
  std::optional<double> alpha_c;
  std::optional<AlphaStar> alpha_star;
  std::string alpha_c_status;  // "found", "zero", "not_found", "n/a"
  std::vector<InfeasiblePoint> infeasible;

  std::size_t feasible_rows() const {
    return static_cast<std::size_t>(std::count_if(
        rows.begin(), rows.end(), [&](const SweepRow& r) { return r.feasible(spec.mode); }));
  }
};

namespace detail {

inline EquilibriumMetrics solve_rational_metrics(const ScenarioParams& p, const SweepSpec& spec) {
  const auto grid = build_grid(p, spec.grid.n_points, spec.grid.truncation);
  const auto sol = solve_gamma(p, grid, spec.gamma_guess, spec.solver);
  return compute_metrics(sol, p, FarmerMode::rational, spec.solver.clearing);
}

inline double investor_return_at(double alpha, const SweepSpec& spec) {
  const auto m = solve_rational_metrics(with_value(spec.base, SweptParameter::alpha, alpha), spec);
  return m.mu_S;
}

// Sign used for alpha_c detection. A degenerate row (no trading) has
// pi_S = -c_S, so its sign is that of -c_S.
inline bool nonnegative_return(const EquilibriumMetrics& m, const ScenarioParams& p) {
  if (m.investor_degenerate) return -p.c_S >= 0.0;
  return m.mu_S >= 0.0;
}

template <class Fn>
void record_failure(SweepRow& row, FarmerMode mode, std::vector<InfeasiblePoint>& out, Fn&& fn) {
  std::string& err = mode == FarmerMode::rational ? row.rational_error : row.naive_error;
  try {
    fn();
  } catch (const InfeasibleScenario& e) {
    err = e.what();
    for (double theta : e.thetas()) out.push_back({row.value, theta, mode, "no clearing price"});
  } catch (const NoEquilibrium& e) {
    err = e.what();
    out.push_back({row.value, e.theta(), mode, "no clearing price"});
  } catch (const ConvergenceFailure& e) {
    err = e.what();
    out.push_back({row.value, std::numeric_limits<double>::quiet_NaN(), mode, e.what()});
  }
}

}  // namespace detail

// Smallest alpha with mu_S >= 0, refined by bisection on fresh solves.
// Rows without rational metrics are skipped.
inline std::optional<double> detect_alpha_c(const SweepSpec& spec, const std::vector<SweepRow>& rows,
                                            std::string* status = nullptr, double tol = 1e-4) {
  auto set = [&](const char* s) {
    if (status) *status = s;
  };
  if (spec.swept != SweptParameter::alpha) {
    set("n/a");
    return std::nullopt;
  }
  const SweepRow* prev = nullptr;
  for (const auto& row : rows) {
    if (!row.rational) continue;
    const bool nonneg = detail::nonnegative_return(*row.rational, row.params);
    if (nonneg) {
      if (!prev) {
        set(row.value == 0.0 ? "zero" : "found");
        return row.value;
      }
      double lo = prev->value, hi = row.value;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (detail::investor_return_at(mid, spec) >= 0.0) hi = mid;
        else lo = mid;
      }
      set("found");
      return 0.5 * (lo + hi);
    }
    prev = &row;
  }
  set("not_found");
  return std::nullopt;
}

// Grid argmax of the rational mu_S over non-degenerate rows, refined by
// golden-section search on fresh solves between the neighbouring values.
inline std::optional<AlphaStar> detect_alpha_star(const SweepSpec& spec,
                                                  const std::vector<SweepRow>& rows,
                                                  double tol = 1e-4) {
  if (spec.swept != SweptParameter::alpha) return std::nullopt;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i].rational;
    if (!m || m->investor_degenerate || !std::isfinite(m->mu_S)) continue;
    if (!best || m->mu_S > rows[*best].rational->mu_S) best = i;
  }
  if (!best) return std::nullopt;

  const std::size_t i = *best;
  AlphaStar out;
  out.grid_index = i;
  out.alpha = rows[i].value;
  out.mu_S = rows[i].rational->mu_S;
  auto usable = [&](std::size_t j) {
    const auto& m = rows[j].rational;
    return m && !m->investor_degenerate && std::isfinite(m->mu_S);
  };
  out.interior = i > 0 && i + 1 < rows.size() && usable(i - 1) && usable(i + 1);
  if (!out.interior) return out;

  auto mu = [&](double a) {
    try {
      return detail::investor_return_at(a, spec);
    } catch (const std::runtime_error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const auto opt = golden_section_maximize(mu, rows[i - 1].value, rows[i + 1].value, tol);
  if (opt.value >= out.mu_S) {
    out.alpha = opt.x;
    out.mu_S = opt.value;
  }
  return out;
}

// Rows are solved independently (possibly in parallel) and assembled in
// value order. The naive gamma depends only on the alpha = 0 scenario, so
// for an alpha sweep it is solved once.
inline SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  spec.base.validate();
  SweepResult result;
  result.spec = spec;

  std::optional<GammaSolution> shared_naive;
  std::string shared_naive_error;
  const bool want_naive = includes(spec.mode, FarmerMode::naive);
  if (want_naive && spec.swept == SweptParameter::alpha) {
    try {
      const auto grid = build_grid(spec.base, spec.grid.n_points, spec.grid.truncation);
      shared_naive = solve_gamma_naive(spec.base, grid, spec.gamma_guess, spec.solver);
    } catch (const std::runtime_error& e) {
      shared_naive_error = e.what();
    }
  }

  struct Slot {
    SweepRow row;
    std::vector<InfeasiblePoint> failures;
  };
  auto solve_row = [&](std::size_t i) {
    Slot slot;
    SweepRow& row = slot.row;
    row.value = spec.values[i];
    row.params = with_value(spec.base, spec.swept, row.value);
    row.params.validate();

    if (includes(spec.mode, FarmerMode::rational))
      detail::record_failure(row, FarmerMode::rational, slot.failures,
                             [&] { row.rational = detail::solve_rational_metrics(row.params, spec); });

    if (want_naive) {
      detail::record_failure(row, FarmerMode::naive, slot.failures, [&] {
        const auto grid = build_grid(row.params, spec.grid.n_points, spec.grid.truncation);
        if (spec.swept == SweptParameter::alpha) {
          if (!shared_naive) throw ConvergenceFailure("naive gamma: " + shared_naive_error,
                                                      std::numeric_limits<double>::infinity());
          row.naive = compute_metrics(*shared_naive, row.params, FarmerMode::naive,
                                      spec.solver.clearing);
        } else {
          const auto naive = solve_gamma_naive(row.params, grid, spec.gamma_guess, spec.solver);
          row.naive = compute_metrics(naive, row.params, FarmerMode::naive, spec.solver.clearing);
        }
      });
    }
    return slot;
  };

  auto slots = parallel_map<Slot>(spec.values.size(), spec.threads, solve_row);
  for (auto& s : slots) {
    result.rows.push_back(std::move(s.row));
    for (auto& f : s.failures) result.infeasible.push_back(std::move(f));
  }

  if (includes(spec.mode, FarmerMode::rational)) {
    result.alpha_c = detect_alpha_c(spec, result.rows, &result.alpha_c_status);
    result.alpha_star = detect_alpha_star(spec, result.rows);
  } else {
    result.alpha_c_status = "n/a";
  }
  return result;
}

// Largest alpha for which the segmented-market expectation keeps every
// node clearable, probed at the top node theta0 + truncation * sigma_bar sqrt(tau).
// Existence is linear in alpha there, so the bound is a ratio.
inline double feasible_alpha_bound(const ScenarioParams& base, const GridConfig& grid = {},
                                   const SolverOptions& solver = {}, double guess = 1.0) {
  ScenarioParams seg = base;
  seg.alpha = 0.0;
  const auto laws = FitnessDistributions::from(seg);
  const double excess = grid.truncation * laws.aggregate_std;
  if (excess == 0.0) return std::numeric_limits<double>::infinity();
  const auto g = build_grid(seg, grid.n_points, grid.truncation);
  const double gamma = solve_gamma(seg, g, guess, solver).gamma;
  return maximal_supply(seg.theta0 + excess, gamma, seg) / excess;
}

inline double default_alpha_max(const ScenarioParams& base, const GridConfig& grid = {},
                                const SolverOptions& solver = {}) {
  return std::min(1.0, feasible_alpha_bound(base, grid, solver));
}

// n values i * alpha_max / n, i = 0..n-1: the half-open range [0, alpha_max).
// The endpoint itself has an unbounded clearing price at the top node.
inline std::vector<double> alpha_values(std::size_t n, double alpha_max) {
  if (n == 0 || !(alpha_max > 0.0)) throw DomainError("alpha_values: need n > 0 and alpha_max > 0");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = alpha_max * static_cast<double>(i) / static_cast<double>(n);
  return v;
}

// ---------------------------------------------------------------------------
// Post-checks: shape properties evaluated on a finished sweep.

struct PostCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

namespace detail {

template <class Get>
std::vector<std::pair<double, double>> rational_series(const SweepResult& r, Get&& get) {
  std::vector<std::pair<double, double>> s;
  for (const auto& row : r.rows)
    if (row.rational) s.emplace_back(row.value, get(*row.rational));
  return s;
}

// Largest violation of monotonicity (sign = +1 nondecreasing, -1 nonincreasing).
inline std::pair<double, double> worst_monotone_violation(
    const std::vector<std::pair<double, double>>& s, int sign) {
  double worst = 0.0, where = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double drop = sign * (s[i - 1].second - s[i].second);
    if (drop > worst) {
      worst = drop;
      where = s[i].first;
    }
  }
  return {worst, where};
}

}  // namespace detail

inline std::vector<PostCheck> sweep_post_checks(const SweepResult& r) {
  std::vector<PostCheck> out;
  if (r.spec.swept != SweptParameter::alpha) return out;

  auto monotone = [&](const char* name, auto get, int sign) {
    const auto s = detail::rational_series(r, get);
    const auto [worst, where] = detail::worst_monotone_violation(s, sign);
    PostCheck c{name, worst <= 0.0, worst, 0.0, {}};
    if (!c.passed) c.detail = "largest reversal at alpha=" + std::to_string(where);
    out.push_back(c);
  };
  monotone("price_std_nonincreasing", [](const EquilibriumMetrics& m) { return m.price_std; }, -1);
  monotone("q_std_nondecreasing", [](const EquilibriumMetrics& m) { return m.q_std; }, +1);

  {
    const auto s = detail::rational_series(r, [](const EquilibriumMetrics& m) {
      return m.investor_degenerate ? std::numeric_limits<double>::quiet_NaN() : m.sigma_S;
    });
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [a, v] : s)
      if (std::isfinite(v)) {
        sum += v;
        ++n;
      }
    double dev = 0.0;
    if (n > 0) {
      const double mean = sum / static_cast<double>(n);
      for (const auto& [a, v] : s)
        if (std::isfinite(v)) dev = std::max(dev, std::abs(v - mean) / mean);
    }
    out.push_back({"sigma_S_nearly_constant", n > 0 && dev < 0.2, dev, 0.2,
                   "max relative deviation from the sweep mean, degenerate rows excluded"});
  }

  if (r.alpha_c && r.alpha_star) {
    out.push_back({"alpha_c_le_alpha_star", *r.alpha_c <= r.alpha_star->alpha,
                   r.alpha_star->alpha - *r.alpha_c, 0.0, "alpha_star - alpha_c"});
  }
  if (r.alpha_star) {
    out.push_back({"alpha_star_interior_maximum", r.alpha_star->interior,
                   r.alpha_star->alpha, 0.0,
                   "grid maximum must exceed both neighbouring grid values"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Market B: larger aggregate volatility and higher demand, calibrated so
// the segmented-market default fraction hits a target.
//
// With the fixed cost proportional to investment the segmented default rate
// is invariant to w (scaling w rescales gamma and every price so that the
// threshold does not move), so the calibration first freezes the fixed cost
// at Market A's capital amount and then moves w.

struct MarketBCalibration {
  ScenarioParams params;
  double default_frac = 0.0;
  int iterations = 0;
};

inline double segmented_default_fraction(const ScenarioParams& p, const GridConfig& grid,
                                         const SolverOptions& solver) {
  ScenarioParams seg = p;
  seg.alpha = 0.0;
  const auto g = build_grid(seg, grid.n_points, grid.truncation);
  const auto sol = solve_gamma(seg, g, 1.0, solver);
  return compute_default_fraction(sol, seg).first;
}

// Market B scenario for a given demand scale, before calibration.
inline ScenarioParams market_b_params(const ScenarioParams& market_a, double w, double sigma_mult,
                                      const GridConfig& grid = {}, const SolverOptions& solver = {}) {
  ScenarioParams b = market_a;
  if (b.fixed_cost_basis == FixedCostBasis::investment_units) {
    ScenarioParams seg = market_a;
    seg.alpha = 0.0;
    const auto g = build_grid(seg, grid.n_points, grid.truncation);
    const double gamma_a = solve_gamma(seg, g, 1.0, solver).gamma;
    b.c_F = effective_fixed_cost(seg, gamma_a);
    b.fixed_cost_basis = FixedCostBasis::absolute;
  }
  b.sigma_bar = market_a.sigma_bar * sigma_mult;
  b.w = w;
  return b;
}

inline MarketBCalibration calibrate_market_B(const ScenarioParams& market_a, double target_default,
                                             double sigma_mult = 2.0, const GridConfig& grid = {},
                                             const SolverOptions& solver = {},
                                             double default_tol = 1e-6) {
  if (!(target_default > 0.0 && target_default < 1.0))
    throw DomainError("calibrate_market_B: target must lie in (0, 1)");
  if (!(sigma_mult > 0.0)) throw DomainError("calibrate_market_B: sigma multiplier must be positive");

  const ScenarioParams shape = market_b_params(market_a, market_a.w, sigma_mult, grid, solver);
  auto default_at = [&](double log_w) {
    ScenarioParams b = shape;
    b.w = std::exp(log_w);
    return segmented_default_fraction(b, grid, solver);
  };

  // Defaults fall as demand rises.
  double lo = std::log(market_a.w / 100.0), hi = std::log(market_a.w * 1e4);
  const double f_lo = default_at(lo), f_hi = default_at(hi);
  if (!(target_default <= f_lo && target_default >= f_hi)) {
    const bool below = target_default < f_hi;
    throw CalibrationFailure(
        "calibrate_market_B: target default " + std::to_string(target_default) +
            " outside the reachable range [" + std::to_string(f_hi) + ", " + std::to_string(f_lo) + "]",
        std::exp(below ? hi : lo), below ? f_hi : f_lo);
  }

  MarketBCalibration out;
  double mid = 0.5 * (lo + hi), f_mid = default_at(mid);
  for (out.iterations = 1; out.iterations < 200; ++out.iterations) {
    if (std::abs(f_mid - target_default) <= default_tol || hi - lo < 1e-14) break;
    if (f_mid > target_default) lo = mid;
    else hi = mid;
    mid = 0.5 * (lo + hi);
    f_mid = default_at(mid);
  }
  out.params = shape;
  out.params.w = std::exp(mid);
  out.default_frac = f_mid;
  return out;
}

// q_std(alpha) / q_std(first row) over the rational rows, NaN where absent.
inline std::vector<double> relative_quantity_volatility(const SweepResult& r) {
  std::vector<double> out(r.rows.size(), std::numeric_limits<double>::quiet_NaN());
  if (r.rows.empty() || !r.rows.front().rational) return out;
  const double ref = r.rows.front().rational->q_std;
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    if (r.rows[i].rational) out[i] = r.rows[i].rational->q_std / ref;
  return out;
}

}  // namespace agrifin
