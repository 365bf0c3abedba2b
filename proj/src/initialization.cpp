#include <algorithm>
#include <cmath>

#include "qmem/echo.hpp"

namespace qmem {

void validate(const InitializationModel& m) {
  if (!(m.pump_strength >= 0.0)) throw ConfigError("pump strength must be non-negative");
  if (!(m.class_step > 0.0) || !(m.profile_step > 0.0)) throw ConfigError("grid spacings must be positive");
  if (!(m.line_width > 0.0)) throw ConfigError("class line width must be positive");
  if (!(m.profile_half_span > 0.0)) throw ConfigError("profile span must be positive");
}

Eigen::Matrix<double, 6, 1> AbsorptionProfile::class_populations(double offset) const {
  if (class_offsets.empty()) throw ConfigError("empty absorption profile");
  const auto it = std::lower_bound(class_offsets.begin(), class_offsets.end(), offset);
  std::size_t k = static_cast<std::size_t>(it - class_offsets.begin());
  if (k == class_offsets.size() || (k > 0 && offset - class_offsets[k - 1] < class_offsets[k] - offset)) --k;
  return populations.row(static_cast<Eigen::Index>(k)).transpose();
}

AbsorptionProfile run_initialization_rate_equations(const LevelScheme& scheme, const FourLevelSystem& sys,
                                                    const Timeline& timeline, const InitializationModel& model) {
  validate(scheme);
  validate(model);
  const double f_signal = sys.signal_frequency;

  // Classes must cover every offset at which some line lands inside the profile window.
  double f_min = transition_frequency(scheme, 1, 1), f_max = f_min;
  for (int g = 1; g <= 6; ++g)
    for (int e = 1; e <= 6; ++e) {
      f_min = std::min(f_min, transition_frequency(scheme, g, e));
      f_max = std::max(f_max, transition_frequency(scheme, g, e));
    }
  const double margin = model.profile_half_span + 50.0 * model.line_width;
  const double x_lo = f_signal - f_max - margin;
  const double x_hi = f_signal - f_min + margin;
  const auto n_classes = static_cast<Eigen::Index>(std::ceil((x_hi - x_lo) / model.class_step)) + 1;

  AbsorptionProfile out;
  out.class_offsets.resize(static_cast<std::size_t>(n_classes));
  for (Eigen::Index k = 0; k < n_classes; ++k)
    out.class_offsets[static_cast<std::size_t>(k)] = x_lo + static_cast<double>(k) * model.class_step;
  out.populations = Eigen::MatrixXd::Constant(n_classes, 6, 1.0 / 6.0);

  Eigen::Matrix<double, 6, 6> decay;
  for (int e = 0; e < 6; ++e) decay.col(e) = scheme.branching.col(e) / scheme.branching.col(e).sum();

  const auto class_index = [&](double x) { return (x - x_lo) / model.class_step; };
  Eigen::MatrixXd before = out.populations;
  std::string phase, repetition_head;
  for (const auto& p : timeline.pulses) {
    if (p.target.is_spin()) continue;
    // a repetition restarts whenever the first pulse name of the current phase recurs
    const std::string tag = p.name.substr(0, p.name.find('_'));
    if (tag != phase) {
      phase = tag;
      repetition_head = p.name;
    }
    if (p.name == repetition_head) before = out.populations;

    const double center = transition_frequency(scheme, p.target.lower.index, p.target.upper.index) + p.center_offset;
    const double half = 0.5 * p.bandwidth;
    for (int g = 1; g <= 6; ++g) {
      for (int e = 1; e <= 6; ++e) {
        const double r = scheme.ratio(g, e);
        if (r <= 0.0) continue;
        // class x absorbs on (g, e) when f_ge + x lies inside the swept band
        const double f = transition_frequency(scheme, g, e);
        const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(class_index(center - half - f) - 1e-9)));
        const auto hi = std::min<Eigen::Index>(n_classes - 1, static_cast<Eigen::Index>(std::floor(class_index(center + half - f) + 1e-9)));
        const double pumped = 1.0 - std::exp(-model.pump_strength * r);
        for (Eigen::Index k = lo; k <= hi; ++k) {
          const double moved = out.populations(k, g - 1) * pumped;
          out.populations(k, g - 1) -= moved;
          out.populations.row(k) += moved * decay.col(e - 1).transpose();
        }
      }
    }
    ++out.pulses_applied;
  }
  if (out.pulses_applied > 0) {
    out.last_change = (out.populations - before).cwiseAbs().maxCoeff();
    out.converged = out.last_change <= model.convergence_tolerance;
  }

  // Lorentzian class lines, normalized so a uniform population gives alpha = 1 on the signal line.
  const double hw = 0.5 * model.line_width;
  const auto n_profile = static_cast<std::size_t>(std::llround(2.0 * model.profile_half_span / model.profile_step)) + 1;
  out.detunings.resize(n_profile);
  out.alpha.assign(n_profile, 0.0);
  const auto reach = static_cast<Eigen::Index>(std::ceil(50.0 * model.line_width / model.class_step));
  double lorentz_sum = 0.0;
  for (Eigen::Index j = -reach; j <= reach; ++j) {
    const double u = static_cast<double>(j) * model.class_step;
    lorentz_sum += hw * hw / (u * u + hw * hw);
  }
  const double thermal = scheme.ratio(sys.ground_pair.first, sys.signal_excited) / 6.0 * lorentz_sum;
  for (std::size_t i = 0; i < n_profile; ++i) {
    const double nu = -model.profile_half_span + static_cast<double>(i) * model.profile_step;
    out.detunings[i] = nu;
    double a = 0.0;
    for (int g = 1; g <= 6; ++g) {
      for (int e = 1; e <= 6; ++e) {
        const double r = scheme.ratio(g, e);
        if (r <= 0.0) continue;
        const double x0 = f_signal + nu - transition_frequency(scheme, g, e);
        const auto k0 = static_cast<Eigen::Index>(std::llround(class_index(x0)));
        for (Eigen::Index k = std::max<Eigen::Index>(0, k0 - reach); k <= std::min(n_classes - 1, k0 + reach); ++k) {
          const double u = out.class_offsets[static_cast<std::size_t>(k)] - x0;
          a += out.populations(k, g - 1) * r * hw * hw / (u * u + hw * hw);
        }
      }
    }
    out.alpha[i] = a / thermal;
  }
  return out;
}

FeatureMetrics measure_feature(const AbsorptionProfile& profile, double search, double floor_fraction) {
  const auto& nu = profile.detunings;
  const auto& a = profile.alpha;
  if (nu.size() < 3) throw ConfigError("absorption profile too short");
  std::size_t k = nu.size();
  for (std::size_t i = 0; i < nu.size(); ++i)
    if (std::abs(nu[i]) <= search && (k == nu.size() || a[i] > a[k])) k = i;
  if (k == nu.size() || !(a[k] > 0.0)) throw NumericalError("no absorption feature near the signal line");

  FeatureMetrics m;
  m.peak = a[k];
  m.center = nu[k];
  m.floor = floor_fraction * m.peak;
  const double half = 0.5 * m.peak;
  const auto crossing = [&](std::size_t i, std::size_t j, double level) {
    return nu[i] + (level - a[i]) * (nu[j] - nu[i]) / (a[j] - a[i]);
  };
  std::size_t l = k, r = k;
  while (l > 0 && a[l - 1] >= half) --l;
  while (r + 1 < nu.size() && a[r + 1] >= half) ++r;
  const double left_half = l > 0 ? crossing(l - 1, l, half) : nu.front();
  const double right_half = r + 1 < nu.size() ? crossing(r, r + 1, half) : nu.back();
  m.width = right_half - left_half;

  // descend the feature flank into the transparent region
  while (l > 0 && a[l] >= m.floor) --l;
  while (r + 1 < nu.size() && a[r] >= m.floor) ++r;
  // the window edge on each side is where alpha regains half of the absorption beyond it
  const double outer_left = *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(l) + 1);
  const double outer_right = *std::max_element(a.begin() + static_cast<std::ptrdiff_t>(r), a.end());
  while (l > 0 && a[l - 1] < 0.5 * outer_left) --l;
  while (r + 1 < nu.size() && a[r + 1] < 0.5 * outer_right) ++r;
  const double left_edge = l > 0 ? crossing(l - 1, l, 0.5 * outer_left) : nu.front();
  const double right_edge = r + 1 < nu.size() ? crossing(r, r + 1, 0.5 * outer_right) : nu.back();
  m.window_width = right_edge - left_edge;
  return m;
}

} // namespace qmem
