#include "qmem/pulses.hpp"

#include <cmath>
#include <limits>

#include "qmem/quadrature.hpp"

namespace qmem {

namespace {

// log(sech x) without overflow for large |x|.
double log_sech(double x) {
  const double a = std::abs(x);
  return -(a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2);
}

double sech(double x) { return 1.0 / std::cosh(x); }

bool inside(double duration, double t) { return std::abs(t) <= 0.5 * duration; }

double json_number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_number())
    throw ConfigError(std::string("pulse preset is missing numeric field ") + key);
  return doc.at(key).get<double>();
}

} // namespace

void validate(const ChsParams& p) {
  if (!(p.omega0 > 0.0)) throw ConfigError("chs omega0 must be positive");
  if (!(p.beta > 0.0)) throw ConfigError("chs beta must be positive");
  if (!(p.duration > 0.0)) throw ConfigError("chs duration must be positive");
  if (!(p.mu_chirp >= 0.0)) throw ConfigError("chs chirp strength must be non-negative");
}

double chs_envelope(const ChsParams& p, double t) {
  return inside(p.duration, t) ? p.omega0 * sech(p.beta * t) : 0.0;
}

double chs_phase(const ChsParams& p, double t) { return -p.mu_chirp * log_sech(p.beta * t) + p.phi0; }

Complex chs_waveform(const ChsParams& p, double t) {
  if (!inside(p.duration, t)) return {0.0, 0.0};
  return std::polar(p.omega0 * sech(p.beta * t), chs_phase(p, t));
}

double chs_lab_field(const ChsParams& p, double t) {
  return chs_envelope(p, t) * std::cos(p.carrier * t + chs_phase(p, t));
}

double instantaneous_detuning(const ChsParams& p, double t) {
  return -p.mu_chirp * p.beta * std::tanh(p.beta * t);
}

double arp_axis_phase(const std::function<double(double)>& envelope,
                      const std::function<double(double)>& detuning,
                      std::pair<double, double> phase_endpoints, double duration) {
  const auto integrand = [&](double t) {
    const double o = envelope(t);
    const double d = detuning(t);
    return std::sqrt(o * o + d * d);
  };
  const double half = 0.5 * duration;
  const double area = integrate_adaptive(integrand, -half, half, 1e-9).value;
  return wrap_two_pi(0.5 * pi - 0.5 * area + 0.5 * (phase_endpoints.first + phase_endpoints.second));
}

double chs_axis_phase(const ChsParams& p) {
  validate(p);
  const auto integrand = [&](double t) {
    const double o = p.omega0 * sech(p.beta * t);
    const double d = p.mu_chirp * p.beta * std::tanh(p.beta * t);
    return std::sqrt(o * o + d * d);
  };
  // even integrand
  const double area = 2.0 * integrate_adaptive(integrand, 0.0, 0.5 * p.duration, 1e-9).value;
  const double boundary = -p.mu_chirp * log_sech(0.5 * p.beta * p.duration) + p.phi0;
  return wrap_two_pi(0.5 * pi - 0.5 * area + boundary);
}

double adiabaticity_margin(const ChsParams& p) {
  validate(p);
  // |dOmega/dt Delta - Omega dDelta/dt| = omega0 mu beta^2 sech(beta t); with u = sech(beta t) the
  // ratio is (B + (A - B) u^2)^{3/2} / (omega0 mu beta^2 u), A = omega0^2, B = (mu beta)^2.
  if (p.mu_chirp == 0.0) return std::numeric_limits<double>::infinity();
  const double a = p.omega0 * p.omega0;
  const double b = std::pow(p.mu_chirp * p.beta, 2);
  const double scale = p.omega0 * p.mu_chirp * p.beta * p.beta;
  const auto ratio = [&](double u) { return std::pow(b + (a - b) * u * u, 1.5) / (scale * u); };
  const double u_min = sech(0.5 * p.beta * p.duration);
  double best = std::min(ratio(u_min), ratio(1.0));
  if (a > b) {
    const double u_star = std::sqrt(b / (2.0 * (a - b)));
    if (u_star > u_min && u_star < 1.0) best = std::min(best, ratio(u_star));
  }
  return best;
}

ChsParams bandwidth_to_params(double bandwidth_hz, double duration, double truncation_sech_level) {
  if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth must be positive");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (!(truncation_sech_level > 0.0 && truncation_sech_level < 1.0))
    throw ConfigError("sech truncation level must lie in (0, 1)");
  const double half_bt = std::acosh(1.0 / truncation_sech_level);
  ChsParams p;
  p.beta = 2.0 * half_bt / duration;
  if (!(p.beta * duration > 0.0)) throw ConfigError("inconsistent chs parameters");
  p.mu_chirp = pi * bandwidth_hz / p.beta;
  p.duration = duration;
  return p;
}

std::string to_string(PulseShape shape) {
  switch (shape) {
  case PulseShape::chs: return "chs";
  case PulseShape::rectangular: return "rectangular";
  case PulseShape::chirped_rectangular: return "chirped_rectangular";
  case PulseShape::truncated_gaussian: return "truncated_gaussian";
  case PulseShape::half_pi_pair_member: return "half_pi_pair_member";
  }
  return "unknown";
}

PulseShape parse_pulse_shape(const std::string& name) {
  for (auto s : {PulseShape::chs, PulseShape::rectangular, PulseShape::chirped_rectangular,
                 PulseShape::truncated_gaussian, PulseShape::half_pi_pair_member})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown pulse shape: " + name);
}

std::string to_string(const Transition& t) {
  const auto label = [](const Level& l) {
    return std::string(l.manifold == Manifold::ground ? "g" : "e") + std::to_string(l.index);
  };
  return label(t.lower) + "-" + label(t.upper);
}

Transition parse_transition(const std::string& label) {
  const auto dash = label.find('-');
  const auto level = [&](const std::string& s) {
    if (s.size() != 2 || (s[0] != 'g' && s[0] != 'e') || s[1] < '1' || s[1] > '6')
      throw ConfigError("bad level label in transition: " + label);
    return Level{s[0] == 'g' ? Manifold::ground : Manifold::excited, s[1] - '0'};
  };
  if (dash == std::string::npos) throw ConfigError("bad transition label: " + label);
  Transition t{level(label.substr(0, dash)), level(label.substr(dash + 1))};
  if (t.lower == t.upper) throw ConfigError("transition levels must differ: " + label);
  if (t.lower.manifold == Manifold::excited && t.upper.manifold == Manifold::excited)
    throw ConfigError("excited-excited transitions are not driven: " + label);
  if (t.lower.manifold == Manifold::excited) std::swap(t.lower, t.upper);
  if (t.is_spin() && t.lower.index > t.upper.index) std::swap(t.lower, t.upper);
  return t;
}

void validate(const PulseSpec& p) {
  if (!(p.duration > 0.0)) throw ConfigError("pulse duration must be positive: " + p.name);
  if (!(p.omega0 >= 0.0) || !std::isfinite(p.omega0)) throw ConfigError("pulse Rabi frequency invalid: " + p.name);
  if (!std::isfinite(p.start_time)) throw ConfigError("pulse start time must be finite: " + p.name);
  if (!(p.amplitude_scale >= 0.0)) throw ConfigError("pulse amplitude scale must be non-negative: " + p.name);
  switch (p.shape) {
  case PulseShape::chs:
  case PulseShape::half_pi_pair_member:
    if (!(p.beta > 0.0) || !(p.mu_chirp >= 0.0)) throw ConfigError("chs pulse needs beta > 0, mu >= 0: " + p.name);
    break;
  case PulseShape::truncated_gaussian:
    if (!(p.fwhm > 0.0) || !(p.fwhm < p.duration))
      throw ConfigError("truncated Gaussian needs 0 < fwhm < duration: " + p.name);
    break;
  case PulseShape::chirped_rectangular:
    if (!(p.bandwidth >= 0.0)) throw ConfigError("chirp bandwidth must be non-negative: " + p.name);
    break;
  case PulseShape::rectangular: break;
  }
}

ChsParams chs_params(const PulseSpec& p) {
  ChsParams c;
  c.omega0 = p.omega0 * p.amplitude_scale * (p.shape == PulseShape::half_pi_pair_member ? 0.5 : 1.0);
  c.beta = p.beta;
  c.mu_chirp = p.mu_chirp;
  c.phi0 = p.phase;
  c.duration = p.duration;
  return c;
}

Complex waveform(const PulseSpec& p, double t) {
  if (!inside(p.duration, t)) return {0.0, 0.0};
  const double offset_phase = two_pi * p.center_offset * t;
  double amplitude = p.omega0 * p.amplitude_scale;
  double phase = p.phase + offset_phase;
  switch (p.shape) {
  case PulseShape::half_pi_pair_member: amplitude *= 0.5; [[fallthrough]];
  case PulseShape::chs:
    amplitude *= sech(p.beta * t);
    phase -= p.mu_chirp * log_sech(p.beta * t);
    break;
  case PulseShape::rectangular: break;
  case PulseShape::chirped_rectangular: phase -= pi * p.bandwidth * t * t / p.duration; break;
  case PulseShape::truncated_gaussian:
    amplitude *= std::exp(-4.0 * std::numbers::ln2 * t * t / (p.fwhm * p.fwhm));
    break;
  }
  return std::polar(amplitude, phase);
}

double peak_rabi(const PulseSpec& p) {
  const double half = p.shape == PulseShape::half_pi_pair_member ? 0.5 : 1.0;
  return p.omega0 * p.amplitude_scale * half;
}

double peak_sweep(const PulseSpec& p) {
  const double offset = two_pi * std::abs(p.center_offset);
  switch (p.shape) {
  case PulseShape::chs:
  case PulseShape::half_pi_pair_member:
    return p.mu_chirp * p.beta * std::tanh(0.5 * p.beta * p.duration) + offset;
  case PulseShape::chirped_rectangular: return pi * p.bandwidth + offset;
  default: return offset;
  }
}

PulseSpec make_chs_pulse(const std::string& name, double bandwidth_hz, double duration, double omega0,
                         Transition target, double truncation_sech_level) {
  const ChsParams c = bandwidth_to_params(bandwidth_hz, duration, truncation_sech_level);
  PulseSpec p;
  p.name = name;
  p.shape = PulseShape::chs;
  p.duration = duration;
  p.omega0 = omega0;
  p.beta = c.beta;
  p.mu_chirp = c.mu_chirp;
  p.bandwidth = bandwidth_hz;
  p.target = target;
  p.nominal_area = pi;
  return p;
}

PulseSpec make_rectangular_pulse(const std::string& name, double duration, double area, Transition target) {
  PulseSpec p;
  p.name = name;
  p.shape = PulseShape::rectangular;
  p.duration = duration;
  p.omega0 = area / duration;
  p.target = target;
  p.nominal_area = area;
  return p;
}

double gaussian_omega_for_area(double duration, double fwhm, double area) {
  // integral of exp(-4 ln2 t^2 / fwhm^2) over [-T/2, T/2]
  const double k = std::sqrt(4.0 * std::numbers::ln2) / fwhm;
  const double integral = std::sqrt(pi) / k * std::erf(0.5 * k * duration);
  return area / integral;
}

PulseSpec make_gaussian_pulse(const std::string& name, double duration, double fwhm, double area,
                              Transition target) {
  PulseSpec p;
  p.name = name;
  p.shape = PulseShape::truncated_gaussian;
  p.duration = duration;
  p.fwhm = fwhm;
  p.omega0 = gaussian_omega_for_area(duration, fwhm, area);
  p.target = target;
  p.nominal_area = area;
  validate(p);
  return p;
}

PulseSpec pulse_from_json(const std::string& name, const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("pulse preset must be an object: " + name);
  const PulseShape shape = parse_pulse_shape(doc.value("shape", std::string("rectangular")));
  const Transition target = parse_transition(doc.value("transition", std::string("g3-e3")));
  const double duration = json_number(doc, "duration_s");
  PulseSpec p;
  switch (shape) {
  case PulseShape::chs:
  case PulseShape::half_pi_pair_member:
    p = make_chs_pulse(name, json_number(doc, "bandwidth_hz"), duration, two_pi * json_number(doc, "rabi_hz"),
                       target, doc.value("truncation", default_sech_truncation));
    break;
  case PulseShape::truncated_gaussian:
    p = make_gaussian_pulse(name, duration, json_number(doc, "fwhm_s"), doc.value("area_rad", pi), target);
    if (doc.contains("rabi_hz")) p.omega0 = two_pi * json_number(doc, "rabi_hz");
    break;
  case PulseShape::rectangular:
  case PulseShape::chirped_rectangular:
    p = make_rectangular_pulse(name, duration, doc.value("area_rad", pi), target);
    if (doc.contains("rabi_hz")) p.omega0 = two_pi * json_number(doc, "rabi_hz");
    p.bandwidth = doc.value("bandwidth_hz", 0.0);
    break;
  }
  p.shape = shape;
  p.phase = doc.value("phase_rad", 0.0);
  p.center_offset = doc.value("center_offset_hz", 0.0);
  p.amplitude_scale = doc.value("amplitude_scale", 1.0);
  if (doc.contains("area_rad")) p.nominal_area = json_number(doc, "area_rad");
  validate(p);
  return p;
}

nlohmann::json to_json(const PulseSpec& p) {
  nlohmann::json j = {{"name", p.name},
                      {"shape", to_string(p.shape)},
                      {"transition", to_string(p.target)},
                      {"start_s", p.start_time},
                      {"duration_s", p.duration},
                      {"rabi_hz", p.omega0 / two_pi},
                      {"phase_rad", p.phase},
                      {"amplitude_scale", p.amplitude_scale},
                      {"center_offset_hz", p.center_offset},
                      {"area_rad", p.nominal_area}};
  if (p.shape == PulseShape::chs || p.shape == PulseShape::half_pi_pair_member) {
    j["beta_per_s"] = p.beta;
    j["mu_chirp"] = p.mu_chirp;
    j["bandwidth_hz"] = p.bandwidth;
  }
  if (p.shape == PulseShape::chirped_rectangular) j["bandwidth_hz"] = p.bandwidth;
  if (p.shape == PulseShape::truncated_gaussian) j["fwhm_s"] = p.fwhm;
  return j;
}

} // namespace qmem
