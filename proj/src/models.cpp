#include "qmem/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "qmem/fitting.hpp"
#include "qmem/random.hpp"
#include "qmem/types.hpp"

namespace qmem {

namespace {

double prefactor(ModelPower p) { return static_cast<double>(static_cast<int>(p)); }

// Gaussian-line intensity exponent scale 2 ln2 / pi^2.
const double gaussian_scale = 2.0 * std::numbers::ln2 / (pi * pi);

void check_points(std::span<const DataPoint> points) {
  if (points.size() < 4) throw ConfigError("decay fit needs at least 4 points");
  bool any = false;
  for (const auto& p : points) {
    if (!(p.t > 0.0)) throw ConfigError("decay fit needs positive times");
    if (!(p.sigma > 0.0)) throw ConfigError("decay fit needs positive sigmas");
    if (!std::isfinite(p.value)) throw ConfigError("non-finite data value");
    any |= p.value != 0.0;
  }
  if (!any) throw ConfigError("all data values are zero");
}

} // namespace

double DecayFit::evaluate(double t) const {
  return amplitude * std::exp(-prefactor(power) * std::pow(t / t2, m));
}

DecayFit fit_mims(std::span<const DataPoint> points, ModelPower power) {
  check_points(points);
  const double p = prefactor(power);
  const auto n = static_cast<Eigen::Index>(points.size());

  // parameters: log amplitude, log T2, log m
  const auto residuals = [&](const Eigen::VectorXd& x) {
    const double a = std::exp(x(0)), t2 = std::exp(x(1)), m = std::exp(x(2));
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& d = points[static_cast<std::size_t>(i)];
      r(i) = (d.value - a * std::exp(-p * std::pow(d.t / t2, m))) / d.sigma;
    }
    return r;
  };
  const auto jacobian = [&](const Eigen::VectorXd& x) {
    const double a = std::exp(x(0)), t2 = std::exp(x(1)), m = std::exp(x(2));
    Eigen::MatrixXd j(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& d = points[static_cast<std::size_t>(i)];
      const double z = std::pow(d.t / t2, m);
      const double f = a * std::exp(-p * z);
      j(i, 0) = -f / d.sigma;
      j(i, 1) = -f * p * m * z / d.sigma;
      j(i, 2) = f * p * z * std::log(d.t / t2) * m / d.sigma;
    }
    return j;
  };

  // starting amplitude and 1/e time from the data
  double a0 = 0.0;
  for (const auto& d : points) a0 = std::max(a0, std::abs(d.value));
  double t2_0 = points[points.size() / 2].t;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& d : points) {
    const double gap = std::abs(d.value - a0 * std::exp(-p));
    if (gap < best_gap) {
      best_gap = gap;
      t2_0 = d.t;
    }
  }

  std::optional<LmResult> best;
  std::string failure;
  for (double m0 : {0.8, 1.0, 1.5, 2.0}) {
    try {
      Eigen::VectorXd x0(3);
      x0 << std::log(a0), std::log(t2_0), std::log(m0);
      auto res = levenberg_marquardt(residuals, jacobian, x0);
      if (!best || res.residual_norm < best->residual_norm) best = std::move(res);
    } catch (const NumericalError& e) {
      failure = e.what();
    }
  }
  if (!best) throw NumericalError(failure.empty() ? "decay fit failed" : failure);

  DecayFit fit;
  fit.amplitude = std::exp(best->x(0));
  fit.t2 = std::exp(best->x(1));
  fit.m = std::exp(best->x(2));
  fit.power = power;
  const Eigen::Vector3d scale(fit.amplitude, fit.t2, fit.m);
  fit.covariance = scale.asDiagonal() * best->covariance * scale.asDiagonal();
  fit.residual_norm = best->residual_norm;
  fit.iterations = best->iterations;
  fit.n_points = points.size();
  return fit;
}

DecayFit fit_tail(std::span<const DataPoint> points, double t_min) {
  std::vector<DataPoint> tail;
  for (const auto& p : points)
    if (p.t >= t_min) tail.push_back(p);
  if (tail.size() < 4) throw ConfigError("tail fit needs at least 4 points beyond t_min");
  return fit_mims(tail, ModelPower::intensity);
}

// ---------------------------------------------------------------------------
// Efficiency surface
// ---------------------------------------------------------------------------

namespace {

// Points sharing one value of `key`, for the value with the most points (smallest value on ties).
template <class Key>
std::vector<SurfacePoint> best_slice(std::span<const SurfacePoint> points, Key key) {
  std::map<double, std::vector<SurfacePoint>> groups;
  for (const auto& p : points) groups[key(p)].push_back(p);
  const std::vector<SurfacePoint>* best = nullptr;
  for (const auto& [k, g] : groups)
    if (!best || g.size() > best->size()) best = &g;
  return best ? *best : std::vector<SurfacePoint>{};
}

std::size_t distinct_count(const std::vector<SurfacePoint>& pts, double SurfacePoint::*field) {
  std::vector<double> v;
  for (const auto& p : pts) v.push_back(p.*field);
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

struct SurfaceModel {
  bool with_gamma = true;

  // x = (log S, log G34, log G23, gamma)
  double value(const Eigen::VectorXd& x, double t31, double t42) const {
    const double g34 = std::exp(x(1)), g23 = std::exp(x(2));
    const double gamma = with_gamma ? x(3) : 0.0;
    return std::exp(x(0) - g34 * g34 * t31 * t31 / gaussian_scale - g23 * g23 * t42 * t42 / gaussian_scale -
                    2.0 * gamma * t42);
  }
};

} // namespace

NlpeFit fit_nlpe_surface(std::span<const SurfacePoint> points, const SurfaceFitOptions& opts) {
  if (points.size() < 8) throw ConfigError("surface fit needs at least 8 points");
  for (const auto& p : points) {
    if (!(p.sigma > 0.0)) throw ConfigError("surface fit needs positive sigmas");
    if (!(p.t31 >= 0.0 && p.t42 >= 0.0)) throw ConfigError("pulse intervals must be non-negative");
  }
  if (!(opts.d > 0.0)) throw ConfigError("absorption depth must be positive");
  const auto t31_axis = best_slice(points, [](const SurfacePoint& p) { return p.t42; });
  const auto t42_axis = best_slice(points, [](const SurfacePoint& p) { return p.t31; });
  if (distinct_count(t31_axis, &SurfacePoint::t31) < 4)
    throw ConfigError("axes not separable: no fixed-t42 slice with 4 distinct t31 values");
  if (distinct_count(t42_axis, &SurfacePoint::t42) < 4)
    throw ConfigError("axes not separable: no fixed-t31 slice with 4 distinct t42 values");

  // t31 axis: A exp(-G34^2 t31^2 / s)
  const auto n1 = static_cast<Eigen::Index>(t31_axis.size());
  const auto r1 = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n1);
    for (Eigen::Index i = 0; i < n1; ++i) {
      const auto& p = t31_axis[static_cast<std::size_t>(i)];
      const double g = std::exp(x(1));
      r(i) = (p.value - std::exp(x(0) - g * g * p.t31 * p.t31 / gaussian_scale)) / p.sigma;
    }
    return r;
  };
  // linearized start: ln I = ln A - (G^2 / s) t^2
  const auto loglinear = [](const std::vector<SurfacePoint>& pts, auto design) {
    const auto m = static_cast<Eigen::Index>(pts.size());
    const Eigen::Index k = static_cast<Eigen::Index>(design(pts[0]).size());
    Eigen::MatrixXd a(m, k);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& p = pts[static_cast<std::size_t>(i)];
      const double w = std::max(p.value, 1e-300) / p.sigma;
      a.row(i) = design(p).transpose() * w;
      b(i) = std::log(std::max(p.value, 1e-300)) * w;
    }
    return Eigen::VectorXd(a.colPivHouseholderQr().solve(b));
  };
  const Eigen::VectorXd lin1 =
      loglinear(t31_axis, [](const SurfacePoint& p) { return Eigen::Vector2d(1.0, -p.t31 * p.t31); });
  Eigen::VectorXd x1(2);
  x1 << lin1(0), 0.5 * std::log(std::max(lin1(1), 1e-30) * gaussian_scale);
  const auto fit1 = levenberg_marquardt(r1, [&](const Eigen::VectorXd& x) { return numeric_jacobian(r1, x); }, x1);
  const double g34 = std::exp(fit1.x(1));

  // t42 axis: B exp(-G23^2 t42^2 / s - 2 gamma t42)
  const auto n2 = static_cast<Eigen::Index>(t42_axis.size());
  const auto make_r2 = [&](bool with_gamma) {
    return [&, with_gamma](const Eigen::VectorXd& x) {
      Eigen::VectorXd r(n2);
      for (Eigen::Index i = 0; i < n2; ++i) {
        const auto& p = t42_axis[static_cast<std::size_t>(i)];
        const double g = std::exp(x(1));
        const double gamma = with_gamma ? x(2) : 0.0;
        r(i) = (p.value - std::exp(x(0) - g * g * p.t42 * p.t42 / gaussian_scale - 2.0 * gamma * p.t42)) / p.sigma;
      }
      return r;
    };
  };
  const Eigen::VectorXd lin2 =
      loglinear(t42_axis, [](const SurfacePoint& p) { return Eigen::Vector3d(1.0, -p.t42 * p.t42, -2.0 * p.t42); });
  Eigen::VectorXd x2(3);
  x2 << lin2(0), 0.5 * std::log(std::max(lin2(1), 1e-30) * gaussian_scale), std::max(lin2(2), 0.0);
  const ResidualFn r2 = make_r2(true);
  auto fit2 = levenberg_marquardt(r2, [&](const Eigen::VectorXd& x) { return numeric_jacobian(r2, x); }, x2);
  bool clamped = false;
  if (fit2.x(2) < 0.0) {
    // constrained refit with the optical rate pinned at zero
    const ResidualFn r2c = make_r2(false);
    const auto refit =
        levenberg_marquardt(r2c, [&](const Eigen::VectorXd& x) { return numeric_jacobian(r2c, x); }, fit2.x.head(2));
    fit2.x.head(2) = refit.x;
    fit2.x(2) = 0.0;
    clamped = true;
  }

  // absolute scale from the t31 slice
  const double t42_ref = t31_axis.front().t42;
  const double g23 = std::exp(fit2.x(1));
  Eigen::VectorXd x(clamped ? 3 : 4);
  x(0) = fit1.x(0) + g23 * g23 * t42_ref * t42_ref / gaussian_scale + 2.0 * fit2.x(2) * t42_ref;
  x(1) = std::log(g34);
  x(2) = fit2.x(1);
  if (!clamped) x(3) = fit2.x(2);

  SurfaceModel model{!clamped};
  const auto n = static_cast<Eigen::Index>(points.size());
  const ResidualFn rall = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      r(i) = (p.value - model.value(v, p.t31, p.t42)) / p.sigma;
    }
    return r;
  };
  LmOptions polish;
  if (!opts.joint_polish) polish.max_iterations = 0;
  auto joint = levenberg_marquardt(rall, [&](const Eigen::VectorXd& v) { return numeric_jacobian(rall, v); }, x, polish);
  if (!clamped && joint.x(3) < 0.0) {
    model.with_gamma = false;
    clamped = true;
    const Eigen::VectorXd head = joint.x.head(3);
    joint = levenberg_marquardt(rall, [&](const Eigen::VectorXd& v) { return numeric_jacobian(rall, v); }, head, polish);
  }
  x = joint.x;

  NlpeFit fit;
  fit.gamma34 = std::exp(x(1));
  fit.gamma23bar = std::exp(x(2));
  fit.gamma_opt = clamped ? 0.0 : x(3);
  fit.gamma_clamped = clamped;
  double scale = std::exp(x(0));
  if (opts.measured_eta) {
    double t31_min = points[0].t31, t42_min = points[0].t42;
    for (const auto& p : points) {
      t31_min = std::min(t31_min, p.t31);
      t42_min = std::min(t42_min, p.t42);
    }
    scale = *opts.measured_eta * scale / model.value(x, t31_min, t42_min);
  }
  const double absorption = opts.d * opts.d * std::exp(-opts.d);
  fit.eta_control = std::pow(scale / absorption, 0.25);

  Eigen::Matrix4d t = Eigen::Matrix4d::Zero();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  cov.topLeftCorner(x.size(), x.size()) = joint.covariance;
  t(0, 1) = fit.gamma34;
  t(1, 2) = fit.gamma23bar;
  t(2, 3) = clamped ? 0.0 : 1.0;
  t(3, 0) = 0.25 * fit.eta_control;
  fit.covariance = t * cov * t.transpose();
  fit.residual_norm = joint.residual_norm;
  return fit;
}

// ---------------------------------------------------------------------------
// Synthetic data and I/O
// ---------------------------------------------------------------------------

std::vector<DataPoint> synthetic_mims(double t2, double m, ModelPower power, std::span<const double> times,
                                      double amplitude, double rel_noise, std::uint64_t seed) {
  DecayFit truth;
  truth.t2 = t2;
  truth.m = m;
  truth.amplitude = amplitude;
  truth.power = power;
  std::vector<DataPoint> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double v = truth.evaluate(times[i]);
    const double z = rel_noise > 0.0 ? normal_quantile(counter_uniform(seed, 0x3117, i)) : 0.0;
    out.push_back({times[i], v * (1.0 + rel_noise * z), rel_noise > 0.0 ? rel_noise * v : 1.0});
  }
  return out;
}

std::vector<SurfacePoint> synthetic_surface(const NlpeFit& truth, double d, std::span<const double> t31_values,
                                            std::span<const double> t42_values, double rel_noise, std::uint64_t seed) {
  const double scale = d * d * std::exp(-d) * std::pow(truth.eta_control, 4);
  std::vector<SurfacePoint> out;
  std::uint64_t counter = 0;
  const auto add = [&](double t31, double t42) {
    const double v = scale * std::exp(-truth.gamma34 * truth.gamma34 * t31 * t31 / gaussian_scale -
                                      truth.gamma23bar * truth.gamma23bar * t42 * t42 / gaussian_scale -
                                      2.0 * truth.gamma_opt * t42);
    const double z = rel_noise > 0.0 ? normal_quantile(counter_uniform(seed, 0x5afe, counter++)) : 0.0;
    out.push_back({t31, t42, v * (1.0 + rel_noise * z), rel_noise > 0.0 ? rel_noise * v : 1.0});
  };
  // one slice along each axis, crossing at the first value of the other axis
  for (double t31 : t31_values) add(t31, t42_values.front());
  for (std::size_t k = 1; k < t42_values.size(); ++k) add(t31_values.front(), t42_values[k]);
  return out;
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(const std::string& path, std::size_t min_cols) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read data file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError("malformed row in " + path + ": " + line);
    }
    first = false;
    if (row.size() < min_cols) throw ConfigError("too few columns in " + path + ": " + line);
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace

std::vector<DataPoint> read_decay_csv(const std::string& path) {
  std::vector<DataPoint> out;
  for (const auto& r : read_numeric_csv(path, 2)) out.push_back({r[0], r[1], r.size() > 2 ? r[2] : 1.0});
  return out;
}

std::vector<SurfacePoint> read_surface_csv(const std::string& path) {
  std::vector<SurfacePoint> out;
  for (const auto& r : read_numeric_csv(path, 3)) out.push_back({r[0], r[1], r[2], r.size() > 3 ? r[3] : 1.0});
  return out;
}

nlohmann::json to_json(const DecayFit& fit) {
  nlohmann::json cov = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) cov.push_back({fit.covariance(i, 0), fit.covariance(i, 1), fit.covariance(i, 2)});
  return {{"t2_s", fit.t2},
          {"m", fit.m},
          {"amplitude", fit.amplitude},
          {"exponent_prefactor", prefactor(fit.power)},
          {"t2_sigma_s", std::sqrt(std::max(0.0, fit.covariance(1, 1)))},
          {"m_sigma", std::sqrt(std::max(0.0, fit.covariance(2, 2)))},
          {"covariance", cov},
          {"residual_norm", fit.residual_norm},
          {"iterations", fit.iterations},
          {"n_points", fit.n_points}};
}

nlohmann::json to_json(const NlpeFit& fit) {
  nlohmann::json cov = nlohmann::json::array();
  for (int i = 0; i < 4; ++i)
    cov.push_back({fit.covariance(i, 0), fit.covariance(i, 1), fit.covariance(i, 2), fit.covariance(i, 3)});
  return {{"gamma34_hz", fit.gamma34},
          {"gamma23bar_hz", fit.gamma23bar},
          {"gamma_opt_per_s", fit.gamma_opt},
          {"eta_control", fit.eta_control},
          {"gamma_clamped", fit.gamma_clamped},
          {"covariance", cov},
          {"residual_norm", fit.residual_norm}};
}

} // namespace qmem
