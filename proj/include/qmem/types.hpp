#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qmem {

using Complex = std::complex<double>;

template <typename Scalar>
using Matrix2c = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

using Matrix2cd = Matrix2c<double>;
using MatrixXcd = Eigen::MatrixXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Bad input data or parameters (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Integration or fitting broke down (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Reduce an angle to [0, 2pi).
inline double wrap_two_pi(double a) {
  double r = std::fmod(a, two_pi);
  if (r < 0) r += two_pi;
  return r;
}

// Signed distance between two angles, in (-pi, pi].
inline double angle_distance(double a, double b) {
  double d = wrap_two_pi(a - b);
  return d > pi ? d - two_pi : d;
}

} // namespace qmem
