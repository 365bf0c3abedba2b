#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "qmem/fitting.hpp"
#include "qmem/models.hpp"
#include "qmem/types.hpp"

using namespace qmem;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

std::string data(const std::string& name) { return std::string(QMEM_DATA_DIR) + "/" + name; }

NlpeFit surface_truth() {
  NlpeFit t;
  t.gamma34 = 7.7e3;
  t.gamma23bar = 8.4e3;
  t.gamma_opt = 5.9e3;
  t.eta_control = 0.82;
  return t;
}

} // namespace

TEST(Lm, WeightedLineMatchesNormalEquations) {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(12, 0.0, 5.0);
  Eigen::VectorXd y(12), w(12);
  for (int i = 0; i < 12; ++i) {
    y(i) = 1.3 - 0.7 * t(i) + 0.05 * std::sin(3.0 * i);
    w(i) = 1.0 / (0.1 + 0.02 * i);
  }
  const auto res = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return (w.array() * (y.array() - x(0) - x(1) * t.array())).matrix();
  };
  const auto jac = [&](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    Eigen::MatrixXd j(12, 2);
    j.col(0) = -w;
    j.col(1) = -(w.array() * t.array()).matrix();
    return j;
  };
  const LmResult r = levenberg_marquardt(res, jac, Eigen::Vector2d(0.0, 0.0));
  Eigen::MatrixXd a(12, 2);
  a.col(0) = w;
  a.col(1) = (w.array() * t.array()).matrix();
  const Eigen::VectorXd exact = (a.transpose() * a).ldlt().solve(a.transpose() * (w.array() * y.array()).matrix());
  EXPECT_NEAR(r.x(0), exact(0), 1e-9);
  EXPECT_NEAR(r.x(1), exact(1), 1e-9);
  EXPECT_LT((numeric_jacobian(res, r.x) - jac(r.x)).norm(), 1e-6);
}

TEST(Lm, RankDeficientJacobianThrows) {
  const auto res = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd r(5);
    for (int i = 0; i < 5; ++i) r(i) = i - (x(0) + x(1));
    return r;
  };
  const auto jac = [](const Eigen::VectorXd&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(5, 2, -1.0); };
  EXPECT_THROW(levenberg_marquardt(res, jac, Eigen::Vector2d(0.0, 0.0)), NumericalError);
}

TEST(Mims, NoiselessDataFitExactly) {
  const auto times = linspace(1.0, 90.0, 25);
  for (auto power : {ModelPower::amplitude, ModelPower::intensity})
    for (auto [t2, m] : {std::pair{18.7, 1.05}, std::pair{33.1, 1.25}, std::pair{27.6, 1.70}}) {
      const auto pts = synthetic_mims(t2, m, power, times, 0.9, 0.0, 1);
      const DecayFit f = fit_mims(pts, power);
      EXPECT_NEAR(f.t2 / t2, 1.0, 1e-8);
      EXPECT_NEAR(f.m / m, 1.0, 1e-8);
      EXPECT_NEAR(f.amplitude, 0.9, 1e-8);
      EXPECT_LT(f.residual_norm, 1e-10);
    }
}

TEST(Mims, PowerLawsDifferByTwoToTheOneOverM) {
  // exp(-2 (t/T)^m) = exp(-(t / (T 2^{-1/m}))^m)
  const auto times = linspace(1.0, 60.0, 20);
  const auto pts = synthetic_mims(20.0, 1.4, ModelPower::intensity, times, 1.0, 0.0, 1);
  const DecayFit amp = fit_mims(pts, ModelPower::amplitude);
  EXPECT_NEAR(amp.t2, 20.0 * std::pow(2.0, -1.0 / 1.4), 1e-6);
  EXPECT_NEAR(amp.m, 1.4, 1e-8);
}

// Property: rescaling the time axis rescales T2 and leaves m unchanged.
TEST(MimsProperty, TimeScaleEquivariance) {
  const auto times = linspace(1.0, 60.0, 30);
  const auto pts = synthetic_mims(27.6, 1.7, ModelPower::amplitude, times, 1.0, 0.02, 13);
  const DecayFit base = fit_mims(pts, ModelPower::amplitude);
  for (double c : {0.01, 3.0, 1e3}) {
    auto scaled = pts;
    for (auto& p : scaled) p.t *= c;
    const DecayFit f = fit_mims(scaled, ModelPower::amplitude);
    EXPECT_NEAR(f.t2 / (c * base.t2), 1.0, 1e-6) << c;
    EXPECT_NEAR(f.m / base.m, 1.0, 1e-6) << c;
  }
}

TEST(Mims, ShippedDatasetsRecoverGenerators) {
  struct Case {
    const char* file;
    double t2, m;
  };
  for (const Case& c : {Case{"decay_18p7s_m1p05.csv", 18.7, 1.05}, Case{"decay_33p1s_m1p25.csv", 33.1, 1.25},
                        Case{"decay_27p6s_m1p70.csv", 27.6, 1.70}}) {
    const DecayFit f = fit_mims(read_decay_csv(data(c.file)), ModelPower::amplitude);
    EXPECT_NEAR(f.t2 / c.t2, 1.0, 0.05) << c.file;
    EXPECT_NEAR(f.m, c.m, 0.1) << c.file;
    EXPECT_GT(f.covariance(1, 1), 0.0);
  }
}

TEST(Mims, TailFitIgnoresDistortedEarlyPoints) {
  const auto pts = read_decay_csv(data("decay_tail_36p3s_m1p25.csv"));
  const DecayFit tail = fit_tail(pts, 15.0);
  const DecayFit full = fit_mims(pts, ModelPower::intensity);
  EXPECT_NEAR(tail.t2 / 36.3, 1.0, 0.05);
  EXPECT_NEAR(tail.m, 1.25, 0.1);
  EXPECT_GT(std::abs(full.t2 / 36.3 - 1.0), std::abs(tail.t2 / 36.3 - 1.0));
  EXPECT_LT(tail.n_points, pts.size());
  EXPECT_THROW(fit_tail(pts, 1e6), ConfigError);
}

TEST(Mims, InputValidation) {
  std::vector<DataPoint> few{{1, 1, 1}, {2, 0.9, 1}, {3, 0.8, 1}};
  EXPECT_THROW(fit_mims(few, ModelPower::amplitude), ConfigError);
  std::vector<DataPoint> bad{{1, 1, 1}, {2, 0.9, 1}, {3, 0.8, 0}, {4, 0.7, 1}};
  EXPECT_THROW(fit_mims(bad, ModelPower::amplitude), ConfigError);
  EXPECT_THROW(read_decay_csv("/nonexistent.csv"), ConfigError);
}

TEST(Csv, MalformedRowsAreConfigErrors) {
  const std::string path = ::testing::TempDir() + "qmem_bad.csv";
  {
    std::ofstream f(path);
    f << "t_s,value,sigma\n1,0.9,0.01\n2,abc,0.01\n";
  }
  EXPECT_THROW(read_decay_csv(path), ConfigError);
  {
    std::ofstream f(path);
    f << "t_s,value\n1,0.9\n2,0.8\n";
  }
  const auto pts = read_decay_csv(path);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[1].sigma, 1.0);
}

TEST(Surface, NoiselessRecoveryIsExact) {
  const auto t31 = linspace(5e-6, 100e-6, 12), t42 = linspace(5e-6, 80e-6, 12);
  const auto pts = synthetic_surface(surface_truth(), 1.0, t31, t42, 0.0, 1);
  const NlpeFit f = fit_nlpe_surface(pts);
  EXPECT_NEAR(f.gamma34 / 7.7e3, 1.0, 1e-6);
  EXPECT_NEAR(f.gamma23bar / 8.4e3, 1.0, 1e-6);
  EXPECT_NEAR(f.gamma_opt / 5.9e3, 1.0, 1e-6);
  EXPECT_NEAR(f.eta_control, 0.82, 1e-8);
}

TEST(Surface, ShippedDatasetWithinTenPercent) {
  const NlpeFit f = fit_nlpe_surface(read_surface_csv(data("nlpe_surface.csv")));
  EXPECT_NEAR(f.gamma34 / 7.7e3, 1.0, 0.1);
  EXPECT_NEAR(f.gamma23bar / 8.4e3, 1.0, 0.1);
  EXPECT_NEAR(f.gamma_opt / 5.9e3, 1.0, 0.1);
  EXPECT_NEAR(f.eta_control / 0.82, 1.0, 0.1);
}

TEST(Surface, MeasuredEfficiencyRescalesControl) {
  const auto t31 = linspace(5e-6, 100e-6, 10), t42 = linspace(5e-6, 80e-6, 10);
  auto pts = synthetic_surface(surface_truth(), 1.0, t31, t42, 0.0, 1);
  const double scale = 1.0 / pts.front().value;
  for (auto& p : pts) p.value *= scale;
  SurfaceFitOptions o;
  o.measured_eta = 1.0 / scale;
  const NlpeFit f = fit_nlpe_surface(pts, o);
  EXPECT_NEAR(f.eta_control, 0.82, 1e-6);
  EXPECT_NEAR(f.gamma34 / 7.7e3, 1.0, 1e-6);
}

TEST(Surface, NonSeparableSamplingRejected) {
  std::vector<SurfacePoint> diag;
  for (int i = 0; i < 10; ++i) diag.push_back({1e-5 * (i + 1), 1e-5 * (i + 1), 0.1, 0.01});
  EXPECT_THROW(fit_nlpe_surface(diag), ConfigError);
}
