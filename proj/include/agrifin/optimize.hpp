#pragma once

#include <cmath>
#include <numbers>

namespace agrifin {

struct ScalarOptimum {
  double x;
  double value;
};

// Golden-section search for the maximum of a unimodal f on [a, b].
template <class Fn>
ScalarOptimum golden_section_maximize(Fn&& f, double a, double b, double tol) {
  const double inv_phi = std::numbers::phi - 1.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? ScalarOptimum{c, fc} : ScalarOptimum{d, fd};
}

}  // namespace agrifin
