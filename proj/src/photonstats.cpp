#include "qmem/photonstats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "qmem/random.hpp"
#include "qmem/types.hpp"

namespace qmem {

const Window& CountHistogram::window(const std::string& name) const {
  for (const auto& w : windows)
    if (w.name == name) return w;
  throw ConfigError("unknown detection window " + name);
}

long long CountHistogram::counts_in(const Window& w) const {
  long long total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double c = 0.5 * (bin_edges[i] + bin_edges[i + 1]);
    if (c >= w.start && c < w.start + w.width) total += counts[i];
  }
  return total;
}

CountHistogram simulate_counts(const BinModel& model, long long n_trials, std::uint64_t seed) {
  const std::size_t bins = model.signal.size();
  if (model.bin_edges.size() != bins + 1 || model.noise.size() != bins)
    throw ConfigError("bin model arrays have inconsistent lengths");
  if (n_trials < 0) throw ConfigError("trial count must be non-negative");
  CountHistogram h;
  h.bin_edges = model.bin_edges;
  h.windows = model.windows;
  h.n_trials = n_trials;
  h.seed = seed;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) {
    const double p = model.signal[i] + model.noise[i];
    if (!(p >= 0.0) || !(model.signal[i] >= 0.0)) throw ConfigError("bin probabilities must be non-negative");
    const double mean = static_cast<double>(n_trials) * p;
    if (mean == 0.0) continue;
    std::mt19937_64 rng(counter_hash(seed, 0xc0417, i));
    h.counts[i] = std::poisson_distribution<long long>(mean)(rng);
  }
  return h;
}

std::string to_string(QubitState s) {
  switch (s) {
  case QubitState::e: return "e";
  case QubitState::l: return "l";
  case QubitState::e_plus_l: return "e+l";
  case QubitState::e_plus_il: return "e+il";
  }
  return "?";
}

QubitState parse_qubit_state(const std::string& name) {
  for (auto s : {QubitState::e, QubitState::l, QubitState::e_plus_l, QubitState::e_plus_il})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown qubit state " + name);
}

void validate(const QubitRun& run) {
  if (!(run.mu_q >= 0.0)) throw ConfigError("mean photon number must be non-negative");
  if (!(run.efficiency >= 0.0 && run.efficiency <= 1.0)) throw ConfigError("efficiency must lie in [0, 1]");
  if (!(run.noise_per_window >= 0.0)) throw ConfigError("noise must be non-negative");
  if (run.n_trials < 0) throw ConfigError("trial count must be non-negative");
}

BinModel qubit_bin_model(const QubitRun& run, const TimeBinLayout& layout) {
  validate(run);
  const double s = layout.bin_separation, w = layout.window_width;
  if (!(s >= w && w > 0.0 && layout.bin_width > 0.0)) throw ConfigError("detection windows must not overlap");
  BinModel m;
  m.windows = {{"early", -0.5 * w, w}, {"central", s - 0.5 * w, w}, {"late", 2.0 * s - 0.5 * w, w},
               {"noise", 4.0 * s - 0.5 * w, w}};
  const double begin = -0.5 * w - s, end = 4.0 * s + 0.5 * w + s;
  const auto bins = static_cast<std::size_t>(std::ceil((end - begin) / layout.bin_width));
  for (std::size_t i = 0; i <= bins; ++i) m.bin_edges.push_back(begin + static_cast<double>(i) * layout.bin_width);
  m.signal.assign(bins, 0.0);
  m.noise.assign(bins, run.noise_per_window * layout.bin_width / w);

  const double total = run.mu_q * run.efficiency;
  std::array<double, 3> gate{};
  switch (run.input_state) {
  case QubitState::e: gate = {total, 0.0, 0.0}; break;
  case QubitState::l: gate = {0.0, total, 0.0}; break;
  case QubitState::e_plus_l:
  case QubitState::e_plus_il: {
    const double state_phase = run.input_state == QubitState::e_plus_il ? 0.5 * pi : 0.0;
    const double central = 0.125 * total * std::norm(1.0 + std::polar(1.0, state_phase - run.analyzer_phase));
    gate = {0.25 * total, central, 0.25 * total};
    break;
  }
  }
  for (std::size_t g = 0; g < 3; ++g) {
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < bins; ++i) {
      const double c = 0.5 * (m.bin_edges[i] + m.bin_edges[i + 1]);
      if (c >= m.windows[g].start && c < m.windows[g].start + m.windows[g].width) inside.push_back(i);
    }
    for (auto i : inside) m.signal[i] = gate[g] / static_cast<double>(inside.size());
  }
  return m;
}

SnrResult snr_from_counts(double in_window, double expected_noise, double noise_scale) {
  if (!(in_window >= 0.0 && expected_noise >= 0.0 && noise_scale > 0.0))
    throw ConfigError("counts must be non-negative");
  SnrResult r;
  r.noise = expected_noise;
  r.signal = in_window - expected_noise;
  if (r.signal < 0.0) {
    r.signal = 0.0;
    r.clamped = true;
  }
  if (expected_noise == 0.0) {
    r.zero_noise = true;
    r.snr = std::numeric_limits<double>::infinity();
    r.sigma = std::numeric_limits<double>::infinity();
    return r;
  }
  r.snr = r.signal / expected_noise;
  // C / N - 1 with Var C = C and Var N = scale * N
  const double var = in_window / (expected_noise * expected_noise) +
                     in_window * in_window * noise_scale / (expected_noise * expected_noise * expected_noise);
  r.sigma = std::sqrt(var);
  return r;
}

SnrResult snr(const CountHistogram& h, const std::string& signal_window, const std::string& noise_reference) {
  const Window& sw = h.window(signal_window);
  const Window& nw = h.window(noise_reference);
  const double scale = sw.width / nw.width;
  return snr_from_counts(static_cast<double>(h.counts_in(sw)), scale * static_cast<double>(h.counts_in(nw)), scale);
}

double basis_fidelity(double signal, double noise) {
  if (!(signal >= 0.0 && noise >= 0.0)) throw ConfigError("counts must be non-negative");
  if (signal == 0.0 && noise == 0.0) throw ConfigError("basis fidelity undefined without counts");
  return (signal + noise) / (signal + 2.0 * noise);
}

double visibility(double c_max, double c_min) {
  if (!(c_min >= 0.0) || !(c_max + c_min > 0.0)) throw ConfigError("visibility needs positive total counts");
  if (c_max < c_min) throw ConfigError("visibility needs c_max >= c_min");
  return (c_max - c_min) / (c_max + c_min);
}

double visibility_fidelity(double c_max, double c_min) { return 0.5 * (visibility(c_max, c_min) + 1.0); }

double total_fidelity(double f_e, double f_l, double f_plus, double f_plus_i) {
  for (double f : {f_e, f_l, f_plus, f_plus_i})
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("fidelities must lie in [0, 1]");
  return (f_e + f_l) / 6.0 + (f_plus + f_plus_i) / 3.0;
}

double classical_bound(double mu_q, double eta) {
  if (!(mu_q > 0.0)) throw ConfigError("mean photon number must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("efficiency must lie in (0, 1]");
  // Poisson weights up to the point where the remaining tail is negligible
  std::vector<double> p{std::exp(-mu_q)};
  double cumulative = p[0];
  while (1.0 - cumulative >= 1e-12 && p.size() < 100000) {
    p.push_back(p.back() * mu_q / static_cast<double>(p.size()));
    cumulative += p.back();
  }
  double accepted = 0.0, score = 0.0;
  for (std::size_t n = p.size(); n-- > 0;) {
    const double take = std::min(p[n], eta - accepted);
    if (take <= 0.0) break;
    const double f = (static_cast<double>(n) + 1.0) / (static_cast<double>(n) + 2.0);
    accepted += take;
    score += take * f;
  }
  return score / accepted;
}

double expected_fidelity(double mu_q, double eta, double noise_per_window) {
  if (!(mu_q >= 0.0 && eta >= 0.0 && noise_per_window >= 0.0)) throw ConfigError("inputs must be non-negative");
  const double s = mu_q * eta;
  const double n = noise_per_window;
  if (s == 0.0 && n == 0.0) return 0.5;
  const double f_basis = basis_fidelity(s, n);
  const double f_sup = visibility_fidelity(0.5 * s + n, n);
  return total_fidelity(f_basis, f_basis, f_sup, f_sup);
}

double crossover_mu(double eta, double noise_per_window, double tolerance) {
  const auto gap = [&](double mu) { return expected_fidelity(mu, eta, noise_per_window) - classical_bound(mu, eta); };
  // geometric scan for the first upward crossing, then bisection
  double lo = 1e-6;
  if (gap(lo) >= 0.0) return lo;
  double hi = lo;
  bool found = false;
  while (hi < 10.0) {
    const double next = std::min(10.0, hi * 1.1);
    if (gap(next) >= 0.0) {
      lo = hi;
      hi = next;
      found = true;
      break;
    }
    hi = next;
  }
  if (!found) throw NumericalError("expected fidelity never reaches the classical bound on (0, 10]");
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) >= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

nlohmann::json to_json(const SnrResult& r) {
  nlohmann::json j = {{"signal_counts", r.signal}, {"noise_counts", r.noise}, {"clamped", r.clamped},
                      {"zero_noise", r.zero_noise}};
  if (r.zero_noise) {
    j["snr"] = "inf";
    j["snr_sigma"] = "inf";
  } else {
    j["snr"] = r.snr;
    j["snr_sigma"] = r.sigma;
  }
  return j;
}

} // namespace qmem
