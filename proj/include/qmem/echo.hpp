#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "qmem/dynamics.hpp"
#include "qmem/levels.hpp"
#include "qmem/sequences.hpp"

namespace qmem {

// Emitted field sampled on a uniform grid, in units of the input-reference peak.
struct EchoField {
  std::vector<double> times;             // s
  std::vector<Complex> amplitude;        // mean signal coherence / reference peak
  std::vector<double> reference_times;   // s, input window of equal width
  std::vector<Complex> input_reference;  // unit peak magnitude
  double reference_peak = 0.0;           // raw mean coherence at the input peak

  double peak_time() const;
};

// Uniform grid covering [window.first, window.second] with spacing at most `step`.
std::vector<double> window_grid(std::pair<double, double> window, double step);

// Mean coherence on `signal_pair` over `window`. The reference is what an ideal memory would emit:
// the coherence left by the input alone, evolved without dephasing over an equal-width window
// centered on the input.
// All ions share one rotating frame, so their coherences add without extra phase weights.
EchoField emit_echo(std::span<const IonState> ions, const Timeline& timeline, const DecoherenceSpec& d,
                    std::pair<Level, Level> signal_pair, std::pair<double, double> window, double grid_step,
                    const EvolveOptions& opts = {});

// Ratio of emitted to input energy on the field grids.
double microscopic_efficiency(const EchoField& echo);

struct EfficiencyBudget {
  double d = 1.0;
  double eta_control = 1.0;
  double gamma = 0.0;       // optical decoherence rate, 1/s
  double gamma34 = 0.0;     // spin inhomogeneous FWHM, Hz
  double gamma23bar = 0.0;  // excited-pair inhomogeneous FWHM, Hz
  double t31 = 0.0;         // s
  double t42 = 0.0;         // s
  double heating_penalty = 1.0;
};

void validate(const EfficiencyBudget& b);

// Intensity factor exp(-fwhm^2 t^2 / (2 ln2 / pi^2)) of a Gaussian inhomogeneous line.
double gaussian_dephasing_factor(double fwhm, double t);

double analytic_efficiency(const EfficiencyBudget& b);

// Expected noise photons per trial from population left in the signal excited level after the
// second spin-partner transfer. `probe` indexes a record holding that level's population.
double dd_noise_rate(const EnsembleRecord& record, std::size_t probe, const LevelScheme& scheme,
                     const FourLevelSystem& sys, double collection_efficiency);

// ---------------------------------------------------------------------------
// Rate-equation initialization
// ---------------------------------------------------------------------------

struct InitializationModel {
  double pump_strength = 3.0;     // optical depth of one pump pulse on a unit-strength line
  double class_step = 10e3;       // Hz, spacing of the optical detuning classes
  double line_width = 20e3;       // Hz, Lorentzian FWHM of one class line
  double profile_half_span = 4e6; // Hz, absorption profile covers f_signal +- this
  double profile_step = 10e3;     // Hz
  double convergence_tolerance = 1e-6;
};

void validate(const InitializationModel& m);

struct AbsorptionProfile {
  std::vector<double> detunings;      // Hz, relative to the signal line
  std::vector<double> alpha;          // relative to a thermal (uniform) ensemble
  std::vector<double> class_offsets;  // Hz
  Eigen::MatrixXd populations;        // classes x 6 ground populations
  long pulses_applied = 0;
  bool converged = true;
  double last_change = 0.0;           // largest population change over the final repetition

  // Ground populations of the class closest to `offset`.
  Eigen::Matrix<double, 6, 1> class_populations(double offset) const;
};

AbsorptionProfile run_initialization_rate_equations(const LevelScheme& scheme, const FourLevelSystem& sys,
                                                    const Timeline& timeline, const InitializationModel& model = {});

struct FeatureMetrics {
  double center = 0.0;        // Hz, relative to the signal line
  double width = 0.0;         // Hz, full width at half the feature peak
  double peak = 0.0;          // relative absorption at the feature maximum
  double window_width = 0.0;  // Hz, full width at half depth of the transparency window
  double floor = 0.0;
};

// The feature is the absorption maximum within `search` Hz of the signal line. Its flanks end where alpha
// drops below `floor_fraction` of the peak; from there each window edge sits where alpha regains half of
// the largest absorption on that side.
FeatureMetrics measure_feature(const AbsorptionProfile& profile, double search = 1e6, double floor_fraction = 0.1);

} // namespace qmem
