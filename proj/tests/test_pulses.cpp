#include <gtest/gtest.h>

#include <cmath>

#include "qmem/config.hpp"
#include "qmem/dynamics.hpp"
#include "qmem/pulses.hpp"
#include "qmem/random.hpp"

using namespace qmem;

namespace {

ChsParams sample_chs() {
  ChsParams p = bandwidth_to_params(0.8e6, 4.1e-6);
  p.omega0 = two_pi * 0.625e6;
  p.phi0 = 0.3;
  return p;
}

// Brute-force minimum of (Omega^2 + Delta^2)^{3/2} / |Omega' Delta - Omega Delta'| with numeric derivatives.
double brute_force_margin(const ChsParams& p) {
  const auto omega = [&](double t) { return p.omega0 / std::cosh(p.beta * t); };
  const auto delta = [&](double t) { return p.mu_chirp * p.beta * std::tanh(p.beta * t); };
  double best = 1e300;
  const int n = 200000;
  for (int i = 0; i <= n; ++i) {
    const double t = -0.5 * p.duration + p.duration * i / n;
    const double h = 1e-6 * p.duration;
    const double dw = (omega(t + h) - omega(t - h)) / (2 * h);
    const double dd = (delta(t + h) - delta(t - h)) / (2 * h);
    const double num = std::pow(omega(t) * omega(t) + delta(t) * delta(t), 1.5);
    const double den = std::abs(dw * delta(t) - omega(t) * dd);
    if (den > 0) best = std::min(best, num / den);
  }
  return best;
}

} // namespace

TEST(Chs, EnvelopeAndPhaseShape) {
  const ChsParams p = sample_chs();
  EXPECT_DOUBLE_EQ(chs_envelope(p, 0.0), p.omega0);
  EXPECT_NEAR(chs_envelope(p, 0.5 * p.duration) / p.omega0, default_sech_truncation, 1e-12);
  EXPECT_EQ(chs_envelope(p, 0.6 * p.duration), 0.0);
  EXPECT_NEAR(chs_phase(p, 1e-6), chs_phase(p, -1e-6), 1e-12);
  EXPECT_DOUBLE_EQ(chs_phase(p, 0.0), p.phi0);
  EXPECT_NEAR(std::abs(chs_waveform(p, 0.7e-6)), chs_envelope(p, 0.7e-6), 1e-6);
}

TEST(Chs, InstantaneousDetuningIsMinusPhaseDerivative) {
  const ChsParams p = sample_chs();
  for (double t : {-1.5e-6, -0.4e-6, 0.0, 0.9e-6, 2.0e-6}) {
    const double h = 1e-11;
    const double derivative = (chs_phase(p, t + h) - chs_phase(p, t - h)) / (2 * h);
    EXPECT_NEAR(instantaneous_detuning(p, t), -derivative, 1e-6 * p.mu_chirp * p.beta);
  }
}

TEST(Chs, BandwidthConversion) {
  const ChsParams p = bandwidth_to_params(22e3, 3.9e-3, 0.01);
  EXPECT_NEAR(1.0 / std::cosh(0.5 * p.beta * p.duration), 0.01, 1e-12);
  // the chirp sweeps mu beta in each direction: full swept range 2 mu beta / 2pi
  EXPECT_NEAR(2.0 * p.mu_chirp * p.beta / two_pi, 22e3, 1e-6);
  EXPECT_THROW(bandwidth_to_params(0.0, 1e-3), ConfigError);
  EXPECT_THROW(bandwidth_to_params(1e3, 1e-3, 1.0), ConfigError);
}

TEST(Chs, AdiabaticityMarginMatchesBruteForce) {
  for (double ratio : {0.5, 1.0, 2.0, 5.0}) {
    ChsParams p = bandwidth_to_params(30e3, 4e-3);
    p.omega0 = ratio * p.mu_chirp * p.beta;
    EXPECT_NEAR(adiabaticity_margin(p) / brute_force_margin(p), 1.0, 1e-4) << ratio;
  }
}

TEST(Chs, GenericAxisPhaseReducesToChsFormula) {
  const ChsParams p = sample_chs();
  const double half = 0.5 * p.duration;
  const double generic =
      arp_axis_phase([&](double t) { return chs_envelope(p, t); }, [&](double t) { return instantaneous_detuning(p, t); },
                     {chs_phase(p, -half), chs_phase(p, half)}, p.duration);
  EXPECT_NEAR(angle_distance(generic, chs_axis_phase(p)), 0.0, 1e-8);
}

TEST(Chs, AxisPhaseFollowsConstantPhase) {
  ChsParams p = sample_chs();
  const double a = chs_axis_phase(p);
  p.phi0 += 0.7;
  EXPECT_NEAR(angle_distance(chs_axis_phase(p), a + 0.7), 0.0, 1e-10);
}

TEST(Pulses, GaussianAreaOracle) {
  const double duration = 3e-6, fwhm = 1.5e-6, area = 0.01;
  const PulseSpec p = make_gaussian_pulse("s", duration, fwhm, area, {ground(3), excited(3)});
  // midpoint rule on the waveform magnitude
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::abs(waveform(p, -0.5 * duration + duration * (i + 0.5) / n));
  EXPECT_NEAR(sum * duration / n, area, 1e-9);
}

TEST(Pulses, RectangularPulseArea) {
  const PulseSpec p = make_rectangular_pulse("r", 2e-6, pi, {ground(3), ground(4)});
  EXPECT_NEAR(peak_rabi(p) * p.duration, pi, 1e-12);
  EXPECT_EQ(peak_sweep(p), 0.0);
}

TEST(Pulses, HalfPairMemberCarriesHalfAmplitude) {
  PulseSpec p = load_run_config(default_config_path()).preset("pi32");
  const double full = peak_rabi(p);
  p.shape = PulseShape::half_pi_pair_member;
  EXPECT_DOUBLE_EQ(peak_rabi(p), 0.5 * full);
}

TEST(Pulses, TransitionLabels) {
  const Transition t = parse_transition("g4-e3");
  EXPECT_EQ(t.lower, ground(4));
  EXPECT_EQ(t.upper, excited(3));
  EXPECT_EQ(to_string(t), "g4-e3");
  EXPECT_TRUE(parse_transition("g3-g4").is_spin());
  for (const char* bad : {"", "g3", "x3-e3", "g7-e1", "g3-e3-e4"}) EXPECT_THROW(parse_transition(bad), ConfigError) << bad;
}

TEST(Pulses, ShapeNamesRoundTrip) {
  for (auto s : {PulseShape::chs, PulseShape::rectangular, PulseShape::chirped_rectangular,
                 PulseShape::truncated_gaussian, PulseShape::half_pi_pair_member})
    EXPECT_EQ(parse_pulse_shape(to_string(s)), s);
  EXPECT_THROW(parse_pulse_shape("triangle"), ConfigError);
}

TEST(Pulses, JsonRoundTripPreservesWaveform) {
  const RunConfig c = load_run_config(default_config_path());
  for (const auto& [name, spec] : c.presets) {
    const PulseSpec back = pulse_from_json(name, to_json(spec));
    for (double t : {-0.3 * spec.duration, 0.0, 0.21 * spec.duration})
      EXPECT_NEAR(std::abs(waveform(back, t) - waveform(spec, t)), 0.0, 1e-9 * spec.omega0) << name;
    EXPECT_EQ(back.target, spec.target);
  }
}

TEST(Pulses, ValidateRejectsBadSpecs) {
  PulseSpec p = make_rectangular_pulse("r", 1e-6, pi, {ground(3), excited(3)});
  p.duration = 0.0;
  EXPECT_THROW(validate(p), ConfigError);
  p = make_gaussian_pulse("g", 1e-6, 0.5e-6, 0.1, {ground(3), excited(3)});
  p.fwhm = 2e-6;
  EXPECT_THROW(validate(p), ConfigError);
  p = make_chs_pulse("c", 1e6, 4e-6, 1e6, {ground(3), excited(3)});
  p.beta = 0.0;
  EXPECT_THROW(validate(p), ConfigError);
}

// Property: simulated propagators of adiabatic CHS pulses invert and rotate about the closed-form axis.
TEST(ChsProperty, PropagatorAxisMatchesClosedForm) {
  int checked = 0;
  for (std::uint64_t k = 0; checked < 4 && k < 200; ++k) {
    const double t = 3e-3 + 3e-3 * counter_uniform(41, 1, k);
    const double bw = 25e3 + 15e3 * counter_uniform(41, 2, k);
    PulseSpec p = make_chs_pulse("x", bw, t, 0.0, {ground(3), ground(4)});
    p.omega0 = (1.5 + counter_uniform(41, 3, k)) * p.mu_chirp * p.beta;
    p.phase = two_pi * counter_uniform(41, 4, k);
    if (adiabaticity_margin(chs_params(p)) < 60.0) continue;
    const Matrix2cd u = pulse_block_propagator(p, 0.0, 0.0);
    EXPECT_GT(std::norm(u(1, 0)), 0.999);
    const double extracted = 0.5 * std::arg(u(1, 0) / u(0, 1));
    EXPECT_NEAR(0.5 * angle_distance(2.0 * extracted, 2.0 * chs_axis_phase(chs_params(p))), 0.0, 1e-2);
    ++checked;
  }
  EXPECT_EQ(checked, 4);
}
