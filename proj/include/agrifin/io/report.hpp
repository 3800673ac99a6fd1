#pragma once

// CSV tables (header row, LF endings, 17 significant digits) and JSON
// summaries for solutions and sweeps.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrifin/expectation.hpp"
#include "agrifin/io/config.hpp"
#include "agrifin/metrics.hpp"
#include "agrifin/sweep.hpp"

namespace agrifin::io {

using Json = nlohmann::ordered_json;

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    add_cells(std::move(cells));
  }

  void add_cells(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw DomainError("csv: row width does not match header");
    rows_.push_back(std::move(cells));
  }

  std::size_t size() const noexcept { return rows_.size(); }

  std::string str() const {
    std::string out;
    append_line(out, header_);
    for (const auto& r : rows_) append_line(out, r);
    return out;
  }

private:
  static void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// NaN and infinities have no JSON spelling; they become null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const ScenarioParams& p) {
  return Json{{"beta", p.beta},          {"w", p.w},
              {"sigma_bar", p.sigma_bar}, {"sigma", p.sigma},
              {"theta0", p.theta0},      {"c_F", p.c_F},
              {"c_S", p.c_S},            {"alpha", p.alpha},
              {"tau", p.tau},            {"fixed_cost_basis", to_string(p.fixed_cost_basis)}};
}

inline Json to_json(const EquilibriumMetrics& m) {
  return Json{{"alpha", number(m.alpha)},
              {"gamma", number(m.gamma)},
              {"q_mean", number(m.q_mean)},
              {"q_std", number(m.q_std)},
              {"price_mean", number(m.price_mean)},
              {"price_std", number(m.price_std)},
              {"default_frac", number(m.default_frac)},
              {"default_frac_std", number(m.default_frac_std)},
              {"pi_F", number(m.pi_F)},
              {"M_F", number(m.M_F)},
              {"mu_F", number(m.mu_F)},
              {"sigma_F", number(m.sigma_F)},
              {"sigma_F_aggregate", number(m.sigma_F_aggregate)},
              {"pi_S", number(m.pi_S)},
              {"M_S", number(m.M_S)},
              {"mu_S", number(m.mu_S)},
              {"sigma_S", number(m.sigma_S)},
              {"investor_degenerate", m.investor_degenerate}};
}

inline Json to_json(const PostCheck& c) {
  return Json{{"name", c.name},
              {"passed", c.passed},
              {"measured", number(c.measured)},
              {"tolerance", number(c.tolerance)},
              {"detail", c.detail}};
}

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{
      "gamma", "q_mean", "q_std", "price_mean", "price_std", "default_frac", "default_frac_std",
      "pi_F", "M_F", "mu_F", "sigma_F", "sigma_F_aggregate", "pi_S", "M_S", "mu_S", "sigma_S",
      "investor_degenerate"};
  return cols;
}

inline std::vector<double> metric_values(const EquilibriumMetrics& m) {
  return {m.gamma,     m.q_mean, m.q_std, m.price_mean, m.price_std, m.default_frac,
          m.default_frac_std, m.pi_F, m.M_F, m.mu_F, m.sigma_F, m.sigma_F_aggregate,
          m.pi_S,      m.M_S,    m.mu_S,  m.sigma_S, m.investor_degenerate ? 1.0 : 0.0};
}

// Per-node price schedule of one solution.
inline CsvTable schedule_table(const PriceSchedule& s, const ScenarioParams& p) {
  CsvTable t({"node", "theta", "weight", "price", "q_supply", "q_financial", "theta_star",
              "default_frac", "residual", "feasible"});
  for (std::size_t k = 0; k < s.grid.n_points(); ++k) {
    const auto& pt = s.points[k];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const bool ok = s.feasible[k];
    t.add_row({static_cast<double>(k), s.grid.nodes[k], s.grid.weights[k], s.prices[k],
               ok ? pt.q_supply : nan, ok ? pt.q_financial : financial_demand(s.grid.nodes[k], p),
               ok ? pt.theta_star : nan, ok ? agrifin::detail::node_default_fraction(pt, p) : nan,
               ok ? pt.residual : nan, ok ? 1.0 : 0.0});
  }
  return t;
}

// One line per (value, mode); failed solves keep their row with NaN cells.
inline CsvTable sweep_table(const SweepResult& r) {
  std::vector<std::string> header{"value", "mode", "feasible"};
  for (const auto& c : metric_columns()) header.push_back(c);
  CsvTable t(header);
  for (const auto& row : r.rows) {
    for (FarmerMode mode : {FarmerMode::rational, FarmerMode::naive}) {
      if (!includes(r.spec.mode, mode)) continue;
      const auto& m = row.get(mode);
      std::vector<std::string> cells{format_double(row.value), to_string(mode), m ? "1" : "0"};
      if (m) {
        for (double v : metric_values(*m)) cells.push_back(format_double(v));
      } else {
        for (std::size_t i = 0; i < metric_columns().size(); ++i) cells.push_back("nan");
      }
      t.add_cells(std::move(cells));
    }
  }
  return t;
}

inline Json sweep_summary(const SweepResult& r) {
  Json j;
  j["parameter"] = to_string(r.spec.swept);
  j["mode"] = to_string(r.spec.mode);
  j["points"] = r.rows.size();
  j["first_value"] = r.spec.values.front();
  j["last_value"] = r.spec.values.back();
  j["feasible_rows"] = r.feasible_rows();
  j["scenario"] = to_json(r.spec.base);
  j["grid"] = Json{{"points", r.spec.grid.n_points}, {"truncation", r.spec.grid.truncation}};
  j["alpha_c_status"] = r.alpha_c_status;
  j["alpha_c"] = r.alpha_c ? number(*r.alpha_c) : Json(nullptr);
  if (r.alpha_star)
    j["alpha_star"] = Json{{"alpha", r.alpha_star->alpha},
                           {"mu_S", number(r.alpha_star->mu_S)},
                           {"interior", r.alpha_star->interior}};
  else
    j["alpha_star"] = nullptr;
  Json inf = Json::array();
  for (const auto& f : r.infeasible)
    inf.push_back(Json{{"value", f.value}, {"theta", number(f.theta)},
                       {"mode", to_string(f.mode)}, {"reason", f.reason}});
  j["infeasible"] = inf;
  Json checks = Json::array();
  for (const auto& c : sweep_post_checks(r)) checks.push_back(to_json(c));
  j["post_checks"] = checks;
  return j;
}

}  // namespace agrifin::io
