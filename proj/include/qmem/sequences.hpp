#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmem/levels.hpp"
#include "qmem/pulses.hpp"

namespace qmem {

enum class MarkerKind { input_signal, readout_window, detection_gate };

std::string to_string(MarkerKind kind);

// Point or window annotation. `time` is the window center.
struct Marker {
  MarkerKind kind = MarkerKind::readout_window;
  std::string label;
  double time = 0.0;
  double width = 0.0;
};

// Absolute times of the five rephasing events, pulse centers in seconds.
struct NlpeTimings {
  double t0 = 0.0, t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0;

  double echo_time() const { return t4 + t3 - t2 - t1 + t0; }
};

struct Timeline {
  std::vector<PulseSpec> pulses;   // sorted by start, non-overlapping
  std::optional<PulseSpec> signal; // input field; may start before t = 0
  std::vector<Marker> markers;
  double total_span = 0.0;
  double clock_jitter = 0.0;       // s, already applied to pulse starts when nonzero
  std::optional<NlpeTimings> timings;

  double begin_time() const;
  double end_time() const;
  std::optional<Marker> find_marker(MarkerKind kind, const std::string& label = {}) const;
};

// Throws ConfigError when pulses are unsorted or overlap.
void validate(const Timeline& timeline);

nlohmann::json to_json(const Timeline& timeline);
Timeline timeline_from_json(const nlohmann::json& doc);

// Presets used by the storage protocols, keyed by role.
struct NlpePresets {
  PulseSpec pi43; // spin partner <-> signal excited
  PulseSpec pi32; // storage ground <-> auxiliary excited
};

inline constexpr double default_readout_width = 2.1e-6;

Timeline build_nlpe(const NlpeTimings& t, const NlpePresets& presets, const PulseSpec& signal,
                    double readout_width = default_readout_width);

struct Ur4Phases {
  double phi2 = 0.5 * pi;
  double delta = 0.0;
  std::array<double, 4> phases{};
  int n_blocks = 1;

  double phase_of(int pulse_index) const { return phases[static_cast<std::size_t>(pulse_index % 4)]; }
};

Ur4Phases ur4_phases(double delta, int n_blocks);

// RF block with pulse centers at tau/2 + k tau, measured from the block origin 0.
Timeline build_chs_ur4(double tau, int n_pulses, const PulseSpec& rf_preset, double delta = 0.0);

// Inserts `dd` into the spin-storage interval of `nlpe`; dd may hold no pulses.
Timeline build_nlpe_dd(const Timeline& nlpe, const Timeline& dd);

// Replaces the final storage-ground <-> auxiliary pulse with two half-area pulses.
// `half_preset` overrides the waveform of the halves (its shape is forced to half_pi_pair_member).
Timeline build_superposition_readout(const Timeline& base, double splitting, double relative_phase,
                                     const std::optional<PulseSpec>& half_preset = std::nullopt);

struct InitializationReps {
  int class_cleaning = 100;
  int spin_polarization = 80;
  int back_burning = 80;
};

struct InitializationPumps {
  double clean_bandwidth = 3.0e6;    // Hz
  double back_bandwidth = 0.8e6;     // Hz
  double pulse_duration = 1.0e-3;    // s
};

// Chirped pump pulses sweep `bandwidth` Hz around the line named by their target.
Timeline build_initialization(const LevelScheme& scheme, const InitializationReps& reps = {},
                              const InitializationPumps& pumps = {});

Timeline build_two_pulse_echo(double tau, const PulseSpec& rf_preset);

// Copy of `timeline` with every pulse start shifted by an independent Gaussian error.
Timeline with_clock_jitter(const Timeline& timeline, double sigma, std::uint64_t seed);

} // namespace qmem
