#pragma once

#include <functional>

#include <Eigen/Dense>

namespace qmem {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LmOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10; // relative parameter step
  double initial_lambda = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  Eigen::MatrixXd covariance;    // (J^T J)^-1 scaled by the reduced chi-square
  double residual_norm = 0.0;    // Euclidean norm of the weighted residuals
  int iterations = 0;
  bool converged = false;
};

// Weighted residuals are minimized in the Euclidean norm. Throws NumericalError when the Jacobian
// at the solution is rank deficient.
LmResult levenberg_marquardt(const ResidualFn& residuals, const JacobianFn& jacobian, Eigen::VectorXd x0,
                             const LmOptions& opts = {});

// Central-difference Jacobian.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& x, double rel_step = 1e-6);

} // namespace qmem
