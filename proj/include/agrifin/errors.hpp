#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agrifin {

// Invalid argument to a numerical primitive (non-finite input, std <= 0, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// The clearing equation has no finite positive price for this node.
class NoEquilibrium : public std::runtime_error {
public:
  NoEquilibrium(double theta, double alpha, double gamma)
      : std::runtime_error(describe(theta, alpha, gamma)),
        theta_(theta), alpha_(alpha), gamma_(gamma) {}

  double theta() const noexcept { return theta_; }
  double alpha() const noexcept { return alpha_; }
  double gamma() const noexcept { return gamma_; }

private:
  static std::string describe(double theta, double alpha, double gamma) {
    std::ostringstream os;
    os.precision(10);
    os << "no clearing price exists at theta=" << theta << " (alpha=" << alpha
       << ", gamma=" << gamma << ")";
    return os.str();
  }

  double theta_;
  double alpha_;
  double gamma_;
};

// An iterative solver hit its iteration cap.
class ConvergenceFailure : public std::runtime_error {
public:
  ConvergenceFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

// One or more quadrature nodes admit no clearing price.
class InfeasibleScenario : public std::runtime_error {
public:
  InfeasibleScenario(std::vector<std::size_t> nodes, std::vector<double> thetas)
      : std::runtime_error(describe(thetas)), nodes_(std::move(nodes)),
        thetas_(std::move(thetas)) {}

  const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& thetas() const noexcept { return thetas_; }

private:
  static std::string describe(const std::vector<double>& thetas) {
    std::ostringstream os;
    os.precision(8);
    os << thetas.size() << " infeasible node(s) at theta =";
    for (std::size_t i = 0; i < thetas.size() && i < 8; ++i) os << ' ' << thetas[i];
    if (thetas.size() > 8) os << " ...";
    return os.str();
  }

  std::vector<std::size_t> nodes_;
  std::vector<double> thetas_;
};

// The closed-form single-farmer expansion is outside its validity region.
class OutOfValidity : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class SingularDenominator : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Market B calibration target is not reachable inside the demand-scale bracket.
class CalibrationFailure : public std::runtime_error {
public:
  CalibrationFailure(const std::string& what, double closest_w, double closest_default)
      : std::runtime_error(what), closest_w_(closest_w), closest_default_(closest_default) {}

  double closest_w() const noexcept { return closest_w_; }
  double closest_default() const noexcept { return closest_default_; }

private:
  double closest_w_;
  double closest_default_;
};

}  // namespace agrifin
