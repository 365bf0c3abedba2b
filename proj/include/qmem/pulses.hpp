#pragma once

#include <functional>
#include <string>
#include <utility>

#include <json.hpp>

#include "qmem/levels.hpp"
#include "qmem/types.hpp"

namespace qmem {

// Complex hyperbolic secant pulse. Time is measured from the pulse center.
struct ChsParams {
  double omega0 = 0.0;   // peak Rabi frequency, rad/s
  double beta = 0.0;     // envelope rate, 1/s
  double mu_chirp = 0.0; // chirp strength
  double phi0 = 0.0;     // constant phase, rad
  double duration = 0.0; // support is [-duration/2, duration/2], s
  double carrier = 0.0;  // rad/s; 0 in the rotating frame
};

void validate(const ChsParams& p);

double chs_envelope(const ChsParams& p, double t);
double chs_phase(const ChsParams& p, double t);
// Omega(t) * exp(i phi(t)); zero outside the support.
Complex chs_waveform(const ChsParams& p, double t);
// Lab-frame field Omega(t) cos(carrier t + phi(t)), for plotting only.
double chs_lab_field(const ChsParams& p, double t);
double instantaneous_detuning(const ChsParams& p, double t);

double arp_axis_phase(const std::function<double(double)>& envelope,
                      const std::function<double(double)>& detuning,
                      std::pair<double, double> phase_endpoints, double duration);
double chs_axis_phase(const ChsParams& p);
double adiabaticity_margin(const ChsParams& p);

inline constexpr double default_sech_truncation = 0.01;

// omega0 is left at 0 for the caller.
ChsParams bandwidth_to_params(double bandwidth_hz, double duration,
                              double truncation_sech_level = default_sech_truncation);

enum class PulseShape { chs, rectangular, chirped_rectangular, truncated_gaussian, half_pi_pair_member };

std::string to_string(PulseShape shape);
PulseShape parse_pulse_shape(const std::string& name);

// Driven pair; `lower` is the level with the lower energy.
struct Transition {
  Level lower;
  Level upper;

  bool is_spin() const { return lower.manifold == Manifold::ground && upper.manifold == Manifold::ground; }
  friend bool operator==(const Transition&, const Transition&) = default;
};

std::string to_string(const Transition& t);
// Accepts labels such as "g3-e3" or "g3-g4".
Transition parse_transition(const std::string& label);

struct PulseSpec {
  std::string name;
  PulseShape shape = PulseShape::rectangular;
  double duration = 0.0;       // s
  double omega0 = 0.0;         // rad/s
  double beta = 0.0;           // 1/s, chs envelope rate
  double mu_chirp = 0.0;       // chs chirp strength
  double bandwidth = 0.0;      // Hz, nominal swept range
  double fwhm = 0.0;           // s, truncated Gaussian width
  double center_offset = 0.0;  // Hz, carrier offset from the nominal line
  double phase = 0.0;          // rad
  double amplitude_scale = 1.0;
  double start_time = 0.0;     // s
  Transition target{ground(3), excited(3)};
  double nominal_area = pi;    // rad

  double center_time() const { return start_time + 0.5 * duration; }
  double end_time() const { return start_time + duration; }
};

// Throws ConfigError on invalid parameters.
void validate(const PulseSpec& p);

ChsParams chs_params(const PulseSpec& p);

// Complex Rabi amplitude at time t from the pulse center.
Complex waveform(const PulseSpec& p, double t);

// Upper bound of |Omega(t)| over the support, rad/s.
double peak_rabi(const PulseSpec& p);
// Largest |d phase / dt| over the support, rad/s.
double peak_sweep(const PulseSpec& p);

PulseSpec make_chs_pulse(const std::string& name, double bandwidth_hz, double duration, double omega0,
                         Transition target, double truncation_sech_level = default_sech_truncation);
PulseSpec make_rectangular_pulse(const std::string& name, double duration, double area, Transition target);
PulseSpec make_gaussian_pulse(const std::string& name, double duration, double fwhm, double area, Transition target);

// Peak Rabi frequency that gives `area` for a truncated Gaussian envelope.
double gaussian_omega_for_area(double duration, double fwhm, double area);

PulseSpec pulse_from_json(const std::string& name, const nlohmann::json& doc);
nlohmann::json to_json(const PulseSpec& p);

} // namespace qmem
