#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace qmem {

// Exponent prefactor p of the decay law exp(-p (t/T2)^m).
enum class ModelPower { amplitude = 1, intensity = 2 };

struct DataPoint {
  double t = 0.0;
  double value = 0.0;
  double sigma = 1.0;
};

struct DecayFit {
  double t2 = 0.0;
  double m = 0.0;
  double amplitude = 0.0;
  ModelPower power = ModelPower::amplitude;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero(); // order: amplitude, t2, m
  double residual_norm = 0.0;
  int iterations = 0;
  std::size_t n_points = 0;

  double evaluate(double t) const;
};

// Weighted stretched-exponential fit, multistart over the stretch exponent.
DecayFit fit_mims(std::span<const DataPoint> points, ModelPower power);

// Intensity-law fit restricted to points with t >= t_min.
DecayFit fit_tail(std::span<const DataPoint> points, double t_min);

struct SurfacePoint {
  double t31 = 0.0;
  double t42 = 0.0;
  double value = 0.0;
  double sigma = 1.0;
};

struct NlpeFit {
  double gamma34 = 0.0;     // Hz
  double gamma23bar = 0.0;  // Hz
  double gamma_opt = 0.0;   // 1/s
  double eta_control = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero(); // order as the fields above
  double residual_norm = 0.0;
  bool gamma_clamped = false; // optical rate pinned at 0 by the constrained refit
};

struct SurfaceFitOptions {
  double d = 1.0;
  // When set, values are relative intensities and the surface is rescaled so that its value
  // at the shortest sampled (t31, t42) equals this efficiency.
  std::optional<double> measured_eta;
  bool joint_polish = true;
};

NlpeFit fit_nlpe_surface(std::span<const SurfacePoint> points, const SurfaceFitOptions& opts = {});

// Model values with multiplicative Gaussian noise of relative size `rel_noise`; sigma = rel_noise * model.
std::vector<DataPoint> synthetic_mims(double t2, double m, ModelPower power, std::span<const double> times,
                                      double amplitude, double rel_noise, std::uint64_t seed);
std::vector<SurfacePoint> synthetic_surface(const NlpeFit& truth, double d, std::span<const double> t31_values,
                                            std::span<const double> t42_values, double rel_noise, std::uint64_t seed);

// CSV with a header row; columns (t, value, sigma) and (t31, t42, value, sigma). Missing sigma means 1.
std::vector<DataPoint> read_decay_csv(const std::string& path);
std::vector<SurfacePoint> read_surface_csv(const std::string& path);

nlohmann::json to_json(const DecayFit& fit);
nlohmann::json to_json(const NlpeFit& fit);

} // namespace qmem
