#include "qmem/fitting.hpp"

#include <cmath>

#include "qmem/types.hpp"

namespace qmem {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& x, double rel_step) {
  const Eigen::VectorXd r0 = residuals(x);
  Eigen::MatrixXd j(r0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::abs(x(k)));
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    j.col(k) = (residuals(xp) - residuals(xm)) / (2.0 * h);
  }
  return j;
}

LmResult levenberg_marquardt(const ResidualFn& residuals, const JacobianFn& jacobian, Eigen::VectorXd x0,
                             const LmOptions& opts) {
  LmResult out;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = residuals(x);
  if (!r.allFinite()) throw NumericalError("non-finite residuals at the starting point");
  double cost = r.squaredNorm();
  double lambda = opts.initial_lambda;

  for (out.iterations = 0; out.iterations < opts.max_iterations; ++out.iterations) {
    const Eigen::MatrixXd j = jacobian(x);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd grad = j.transpose() * r;
    bool improved = false;
    Eigen::VectorXd step;
    while (lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      step = a.ldlt().solve(-grad);
      const Eigen::VectorXd trial = x + step;
      const Eigen::VectorXd rt = residuals(trial);
      const double ct = rt.allFinite() ? rt.squaredNorm() : std::numeric_limits<double>::infinity();
      if (ct <= cost) {
        x = trial;
        r = rt;
        cost = ct;
        lambda = std::max(lambda * 0.3, 1e-15);
        improved = true;
        break;
      }
      lambda *= 10.0;
    }
    const double rel = step.norm() / (x.norm() + 1e-300);
    if (!improved || rel < opts.step_tolerance) {
      out.converged = improved || rel < opts.step_tolerance || cost == 0.0;
      break;
    }
  }

  const Eigen::MatrixXd j = jacobian(x);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j);
  qr.setThreshold(1e-12);
  if (qr.rank() < x.size()) throw NumericalError("rank-deficient Jacobian: parameters are not identifiable");
  const auto n = r.size();
  const auto p = x.size();
  const double scale = n > p ? cost / static_cast<double>(n - p) : 1.0;
  out.covariance = (j.transpose() * j).inverse() * scale;
  out.x = x;
  out.residual_norm = std::sqrt(cost);
  return out;
}

} // namespace qmem
