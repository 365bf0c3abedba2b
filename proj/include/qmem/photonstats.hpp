#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace qmem {

struct Window {
  std::string name;
  double start = 0.0; // s
  double width = 0.0; // s
};

struct CountHistogram {
  std::vector<double> bin_edges; // s, size = counts + 1
  std::vector<long long> counts;
  long long n_trials = 0;
  std::vector<Window> windows;
  std::uint64_t seed = 0;

  const Window& window(const std::string& name) const;
  // Counts of bins whose centers fall inside the window.
  long long counts_in(const Window& w) const;
};

// Expected counts per trial for every histogram bin.
struct BinModel {
  std::vector<double> bin_edges;
  std::vector<double> signal; // per-trial signal probability per bin
  std::vector<double> noise;  // per-trial noise probability per bin
  std::vector<Window> windows;
};

// Counts ~ Poisson(n_trials (signal + noise)) per bin, one counter-seeded generator per bin.
CountHistogram simulate_counts(const BinModel& model, long long n_trials, std::uint64_t seed);

enum class QubitState { e, l, e_plus_l, e_plus_il };

std::string to_string(QubitState s);
QubitState parse_qubit_state(const std::string& name);

struct QubitRun {
  QubitState input_state = QubitState::e;
  double mu_q = 1.0;
  double efficiency = 0.0;
  double noise_per_window = 0.0; // expected noise counts per trial in one detection window
  long long n_trials = 1;
  double analyzer_phase = 0.0;   // rad, relative phase of the split readout
};

void validate(const QubitRun& run);

struct TimeBinLayout {
  double bin_separation = 3e-6; // s
  double window_width = 2.1e-6; // s
  double bin_width = 0.1e-6;    // s, histogram resolution
};

// Gates "early", "central", "late" and a signal-free "noise" gate. Basis states populate early or
// late; superposition states pass the split readout and interfere in the central gate.
BinModel qubit_bin_model(const QubitRun& run, const TimeBinLayout& layout = {});

struct SnrResult {
  double snr = 0.0;
  double sigma = 0.0;
  double signal = 0.0; // noise-subtracted counts
  double noise = 0.0;  // expected noise counts in the signal window
  bool clamped = false;    // negative signal set to 0
  bool zero_noise = false; // snr is +infinity
};

// `expected_noise` is `noise_scale` times the noise-reference counts; both counts are Poisson.
SnrResult snr_from_counts(double in_window, double expected_noise, double noise_scale = 1.0);
SnrResult snr(const CountHistogram& h, const std::string& signal_window, const std::string& noise_reference);

double basis_fidelity(double signal, double noise);
double visibility(double c_max, double c_min);
double visibility_fidelity(double c_max, double c_min);
double total_fidelity(double f_e, double f_l, double f_plus, double f_plus_i);

double classical_bound(double mu_q, double eta);

// Expectation-only fidelity: basis states give signal mu eta against one window of noise, superposition
// states put mu eta / 2 in the constructive central gate.
double expected_fidelity(double mu_q, double eta, double noise_per_window);

// Smallest mu on (0, 10] where expected_fidelity reaches classical_bound. Throws NumericalError when
// there is no crossing.
double crossover_mu(double eta, double noise_per_window, double tolerance = 1e-4);

nlohmann::json to_json(const SnrResult& r);

} // namespace qmem
