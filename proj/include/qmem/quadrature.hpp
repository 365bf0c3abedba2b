#pragma once

#include <functional>

namespace qmem {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

// Globally adaptive Gauss-Kronrod (7/15) integration.
// Throws NumericalError on a non-finite integrand or if max_intervals is exhausted.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double rel_tol = 1e-9, double abs_tol = 0.0, int max_intervals = 4000);

} // namespace qmem
