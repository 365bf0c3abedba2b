#include "qmem/echo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qmem/random.hpp"

namespace qmem {

double EchoField::peak_time() const {
  if (amplitude.empty()) throw ConfigError("empty echo field");
  std::size_t k = 0;
  for (std::size_t i = 1; i < amplitude.size(); ++i)
    if (std::norm(amplitude[i]) > std::norm(amplitude[k])) k = i;
  if (k == 0 || k + 1 == amplitude.size()) return times[k];
  // parabolic refinement on |A|^2
  const double y0 = std::norm(amplitude[k - 1]), y1 = std::norm(amplitude[k]), y2 = std::norm(amplitude[k + 1]);
  const double curvature = y0 - 2.0 * y1 + y2;
  if (curvature >= 0.0) return times[k];
  const double shift = 0.5 * (y0 - y2) / curvature;
  return times[k] + shift * (times[k + 1] - times[k]);
}

std::vector<double> window_grid(std::pair<double, double> window, double step) {
  const auto [a, b] = window;
  if (!(b > a)) throw ConfigError("empty time window");
  if (!(step > 0.0)) throw ConfigError("grid step must be positive");
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / step - 1e-9));
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
  return grid;
}

namespace {

double optical_spread_fwhm(std::span<const IonState> ions) {
  if (ions.size() < 2) return 0.0;
  double mean = 0.0;
  for (const auto& ion : ions) mean += ion.optical_detuning;
  mean /= static_cast<double>(ions.size());
  double var = 0.0;
  for (const auto& ion : ions) var += (ion.optical_detuning - mean) * (ion.optical_detuning - mean);
  return fwhm_per_sigma * std::sqrt(var / static_cast<double>(ions.size() - 1));
}

std::vector<Complex> mean_series(const EnsembleRecord& rec, std::pair<Level, Level> pair) {
  std::vector<Complex> out(rec.times.size());
  for (std::size_t p = 0; p < rec.times.size(); ++p) out[p] = rec.mean(p, pair);
  return out;
}

} // namespace

EchoField emit_echo(std::span<const IonState> ions, const Timeline& timeline, const DecoherenceSpec& d,
                    std::pair<Level, Level> signal_pair, std::pair<double, double> window, double grid_step,
                    const EvolveOptions& opts) {
  if (ions.empty()) throw ConfigError("empty ensemble");
  if (!timeline.signal) throw ConfigError("echo emission needs an input signal in the timeline");
  const double spread = optical_spread_fwhm(ions);
  if (spread > 0.0 && grid_step > 1.0 / (10.0 * spread))
    throw ConfigError("echo grid step does not resolve the optical inhomogeneous line");
  const double slack = 1e-12 * std::max(1.0, std::abs(timeline.end_time() - timeline.begin_time()));
  if (window.first < timeline.begin_time() - slack || window.second > timeline.end_time() + slack)
    throw ConfigError("echo window lies outside the timeline span");

  EchoField field;
  field.times = window_grid(window, grid_step);
  const auto rec = simulate_ensemble(ions, timeline, d, field.times, {signal_pair}, opts);
  field.amplitude = mean_series(rec, signal_pair);

  // Ideal rephasing reference: the coherence each ion holds after the input, evolved freely
  // without dephasing back over a window of equal width centered on the input.
  Timeline input_only;
  input_only.signal = timeline.signal;
  const double t_end = timeline.signal->end_time();
  input_only.total_span = t_end;
  const std::vector<double> end_probe{t_end};
  const auto ref = simulate_ensemble(ions, input_only, d, end_probe, {signal_pair}, opts);
  const double width = window.second - window.first;
  const double t0 = timeline.signal->center_time();
  field.reference_times = window_grid({t0 - 0.5 * width, t0 + 0.5 * width}, grid_step);
  const auto& subset = *ions[0].subset;
  const int a = subset.require_index(signal_pair.first);
  const int b = subset.require_index(signal_pair.second);
  std::vector<double> rate(ions.size());
  for (std::size_t i = 0; i < ions.size(); ++i) {
    const Eigen::VectorXd eps = frame_energies(ions[i]);
    rate[i] = eps(a) - eps(b);
  }
  field.input_reference.resize(field.reference_times.size());
  std::vector<Complex> terms(ions.size());
  for (std::size_t k = 0; k < field.reference_times.size(); ++k) {
    const double dt = field.reference_times[k] - t_end;
    for (std::size_t i = 0; i < ions.size(); ++i)
      terms[i] = ref.values[0](static_cast<Eigen::Index>(i), 0) * std::polar(1.0, -rate[i] * dt);
    field.input_reference[k] = pairwise_sum(terms) / static_cast<double>(ions.size());
  }

  for (const auto& v : field.input_reference) field.reference_peak = std::max(field.reference_peak, std::abs(v));
  if (!(field.reference_peak > 0.0)) throw NumericalError("input reference has no macroscopic coherence");
  for (auto& v : field.input_reference) v /= field.reference_peak;
  for (auto& v : field.amplitude) v /= field.reference_peak;
  return field;
}

namespace {

double trapezoid_energy(const std::vector<double>& t, const std::vector<Complex>& a) {
  double s = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (std::norm(a[i - 1]) + std::norm(a[i])) * (t[i] - t[i - 1]);
  return s;
}

} // namespace

double microscopic_efficiency(const EchoField& echo) {
  if (echo.times.size() != echo.amplitude.size() || echo.reference_times.size() != echo.input_reference.size())
    throw ConfigError("echo field grids are inconsistent");
  const double input = trapezoid_energy(echo.reference_times, echo.input_reference);
  if (!(input > 0.0)) throw ConfigError("input reference carries no energy");
  return trapezoid_energy(echo.times, echo.amplitude) / input;
}

void validate(const EfficiencyBudget& b) {
  if (!(b.d >= 0.0)) throw ConfigError("absorption depth must be non-negative");
  if (!(b.eta_control >= 0.0 && b.eta_control <= 1.0)) throw ConfigError("control efficiency must lie in [0, 1]");
  if (!(b.heating_penalty > 0.0 && b.heating_penalty <= 1.0)) throw ConfigError("heating penalty must lie in (0, 1]");
  if (!(b.gamma >= 0.0 && b.gamma34 >= 0.0 && b.gamma23bar >= 0.0)) throw ConfigError("rates must be non-negative");
  if (!(b.t31 >= 0.0 && b.t42 >= 0.0)) throw ConfigError("pulse intervals must be non-negative");
}

double gaussian_dephasing_factor(double fwhm, double t) {
  const double scale = 2.0 * std::numbers::ln2 / (pi * pi);
  return std::exp(-fwhm * fwhm * t * t / scale);
}

double analytic_efficiency(const EfficiencyBudget& b) {
  validate(b);
  const double absorption = b.d * b.d * std::exp(-b.d);
  const double control = std::pow(b.eta_control, 4);
  return absorption * control * gaussian_dephasing_factor(b.gamma34, b.t31) *
         gaussian_dephasing_factor(b.gamma23bar, b.t42) * std::exp(-2.0 * b.gamma * b.t42) * b.heating_penalty;
}

double dd_noise_rate(const EnsembleRecord& record, std::size_t probe, const LevelScheme& scheme,
                     const FourLevelSystem& sys, double collection_efficiency) {
  if (!(collection_efficiency >= 0.0 && collection_efficiency <= 1.0))
    throw ConfigError("collection efficiency must lie in [0, 1]");
  const Level e = excited(sys.signal_excited);
  const double population = record.mean(probe, {e, e}).real();
  const double column = scheme.branching.col(sys.signal_excited - 1).sum();
  const double into_band = scheme.ratio(sys.ground_pair.first, sys.signal_excited) / column;
  return std::max(0.0, population) * into_band * collection_efficiency;
}

} // namespace qmem
