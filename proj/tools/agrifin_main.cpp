#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "agrifin/io/commands.hpp"

using namespace agrifin;
using namespace agrifin::io;

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<double> alpha;
  std::optional<std::string> mode;
  std::optional<std::size_t> grid_points;
  std::optional<double> truncation;
  std::optional<double> tol;
  std::optional<std::string> threads;
};

RunConfig resolve(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.out) cfg.output.directory = *f.out;
  if (f.alpha) {
    cfg.scenario.alpha = *f.alpha;
    cfg.scenario.validate();
  }
  if (f.mode) {
    if (!cfg.sweep) cfg.sweep = SweepConfig{};
    cfg.sweep->mode = parse_sweep_mode(*f.mode);
  }
  if (f.grid_points) {
    if (*f.grid_points < 3) throw ConfigError("--grid-points must be >= 3");
    cfg.solver.grid.n_points = *f.grid_points;
  }
  if (f.truncation) {
    if (!(*f.truncation > 0.0)) throw ConfigError("--truncation must be positive");
    cfg.solver.grid.truncation = *f.truncation;
  }
  if (f.tol) {
    if (!(*f.tol > 0.0)) throw ConfigError("--tol must be positive");
    cfg.solver.tol = *f.tol;
  }
  if (f.threads) cfg.output.threads = parse_threads(*f.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Commodity market equilibrium with farmers and a financial investor."};
  app.footer(exit_code_help);
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "YAML run configuration (baseline defaults if omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", f.out, "output directory");
  app.add_option("--alpha", f.alpha, "market integration; figure 1 uses it for the second curve");
  app.add_option("--mode", f.mode, "farmer expectations")
      ->check(CLI::IsMember({"rational", "naive", "both"}));
  app.add_option("--grid-points", f.grid_points, "quadrature nodes (default 133)");
  app.add_option("--truncation", f.truncation, "grid half-width in aggregate std (default 4)");
  app.add_option("--tol", f.tol, "solver tolerance (default 1e-7)");
  app.add_option("--threads", f.threads, "sweep workers, n or auto");

  auto* solve = app.add_subcommand("solve", "solve one scenario");
  auto* sweep = app.add_subcommand("sweep", "comparative statics over one parameter");
  auto* figure = app.add_subcommand("figure", "emit the data and plot script for a figure");
  int figure_id = 0;
  figure->add_option("id", figure_id, "figure number")->required()->check(CLI::Range(1, 6));
  auto* validate = app.add_subcommand("validate", "run the invariant suite");
  auto* calibrate = app.add_subcommand("calibrate-market-b", "calibrate the low-default market");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config_error;
  }

  try {
    const RunConfig cfg = resolve(f);
    if (solve->parsed()) return cmd_solve(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (figure->parsed()) return cmd_figure(cfg, figure_id);
    if (validate->parsed()) return cmd_validate(cfg);
    if (calibrate->parsed()) return cmd_calibrate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return exit_config_error;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return exit_config_error;
  } catch (const InfeasibleScenario& e) {
    std::cerr << "infeasible scenario: " << e.what() << "\n";
    return exit_sweep_infeasible;
  } catch (const NoEquilibrium& e) {
    std::cerr << e.what() << "\n";
    return exit_sweep_infeasible;
  } catch (const ConvergenceFailure& e) {
    std::cerr << e.what() << "\n";
    return exit_convergence_failure;
  } catch (const CalibrationFailure& e) {
    std::cerr << e.what() << "\n";
    return exit_calibration_failure;
  }
  return exit_config_error;
}
