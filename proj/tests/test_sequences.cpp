#include <gtest/gtest.h>

#include <cmath>

#include "qmem/config.hpp"
#include "qmem/dynamics.hpp"
#include "qmem/sequences.hpp"

using namespace qmem;

namespace {

const RunConfig& cfg() {
  static const RunConfig c = load_run_config(default_config_path());
  return c;
}

NlpePresets presets() { return {cfg().preset("pi43"), cfg().preset("pi32")}; }

Matrix2cd ideal_block(const std::array<double, 4>& phases) {
  Matrix2cd u = Matrix2cd::Identity();
  for (double ph : phases) u = equatorial_rotation(pi, ph) * u;
  return u;
}

} // namespace

TEST(Ur4, DeltaZeroIsXy4) {
  const Ur4Phases u = ur4_phases(0.0, 1);
  const std::array<double, 4> xy4{0.0, 0.5 * pi, 0.0, 0.5 * pi};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(angle_distance(u.phases[k], xy4[k]), 0.0, 1e-15) << k;
}

TEST(Ur4, PhasePatternFollowsPhi2) {
  for (double delta : {-0.4, 0.1, 1.3}) {
    const Ur4Phases u = ur4_phases(delta, 2);
    const double p2 = 0.5 * pi + delta;
    EXPECT_NEAR(angle_distance(u.phases[1], p2), 0.0, 1e-12);
    EXPECT_NEAR(angle_distance(u.phases[2], pi + 2 * p2), 0.0, 1e-12);
    EXPECT_NEAR(angle_distance(u.phases[3], 3 * pi + 3 * p2), 0.0, 1e-12);
    EXPECT_EQ(u.phase_of(5), u.phases[1]);
  }
  EXPECT_THROW(ur4_phases(0.0, 0), ConfigError);
}

// Ideal pi pulses compose to diag(e^{-2i phi2}, e^{2i phi2}); the block is the identity up to global phase
// exactly when phi2 is a multiple of pi/2.
TEST(Ur4, IdealBlockIsZRotationByFourPhi2) {
  for (int k = 0; k < 16; ++k) {
    const double phi2 = two_pi * k / 16.0;
    const Matrix2cd u = ideal_block({0.0, phi2, pi + 2 * phi2, 3 * pi + 3 * phi2});
    Matrix2cd z = Matrix2cd::Zero();
    z(0, 0) = std::polar(1.0, -2 * phi2);
    z(1, 1) = std::polar(1.0, 2 * phi2);
    EXPECT_LT((u - z).norm(), 1e-12) << phi2;
  }
  for (double phi2 : {0.0, 0.5 * pi, pi, 1.5 * pi}) {
    const Matrix2cd u = ideal_block({0.0, phi2, pi + 2 * phi2, 3 * pi + 3 * phi2});
    EXPECT_LT((u / u(0, 0) - Matrix2cd::Identity()).norm(), 1e-12);
  }
}

TEST(Ur4, BlockTimelineLayout) {
  const PulseSpec rf = cfg().preset("rf_pi");
  const Timeline tl = build_chs_ur4(10.5, 4, rf, 0.0);
  ASSERT_EQ(tl.pulses.size(), 4u);
  EXPECT_DOUBLE_EQ(tl.total_span, 42.0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(tl.pulses[k].center_time(), (k + 0.5) * 10.5, 1e-12);
  EXPECT_THROW(build_chs_ur4(1.4, 3, rf), ConfigError);
  EXPECT_THROW(build_chs_ur4(1e-3, 4, rf), ConfigError);
}

TEST(Nlpe, EchoTimeAndMarkers) {
  const NlpeTimings t = cfg().timings;
  EXPECT_NEAR(t.echo_time(), t.t4 + t.t3 - t.t2 - t.t1 + t.t0, 0.0);
  EXPECT_NEAR(t.echo_time(), 28.1e-6, 1e-15);
  const Timeline tl = build_nlpe(t, presets(), cfg().signal);
  ASSERT_EQ(tl.pulses.size(), 4u);
  EXPECT_EQ(tl.pulses[0].target, parse_transition("g4-e3"));
  EXPECT_EQ(tl.pulses[1].target, parse_transition("g3-e2"));
  const auto readout = tl.find_marker(MarkerKind::readout_window);
  ASSERT_TRUE(readout);
  EXPECT_DOUBLE_EQ(readout->time, t.echo_time());
  EXPECT_LT(tl.signal->start_time, 0.0);
}

TEST(Nlpe, RejectsBadOrdering) {
  NlpeTimings t = cfg().timings;
  std::swap(t.t1, t.t2);
  EXPECT_THROW(build_nlpe(t, presets(), cfg().signal), ConfigError);
  NlpeTimings crowded{0.0, 1e-6, 2e-6, 3e-6, 4e-6};
  EXPECT_THROW(build_nlpe(crowded, presets(), cfg().signal), ConfigError);
}

TEST(NlpeDd, StorageShiftsReadoutByBlockSpan) {
  const Timeline nlpe = build_nlpe(cfg().timings, presets(), cfg().signal);
  for (auto [tau, expected] : {std::pair{1.4, 5.6}, std::pair{10.5, 42.0}}) {
    const Timeline tl = build_nlpe_dd(nlpe, build_chs_ur4(tau, 4, cfg().preset("rf_pi")));
    EXPECT_NEAR(tl.timings->echo_time(), expected + cfg().timings.echo_time(), 1e-12);
    EXPECT_EQ(tl.pulses.size(), 8u);
    // DD sits between the first two optical pulses
    EXPECT_TRUE(tl.pulses[1].target.is_spin());
    EXPECT_TRUE(tl.pulses[4].target.is_spin());
    EXPECT_FALSE(tl.pulses[5].target.is_spin());
  }
  Timeline empty;
  const Timeline same = build_nlpe_dd(nlpe, empty);
  EXPECT_EQ(nlohmann::json(to_json(same)).dump(), nlohmann::json(to_json(nlpe)).dump());
}

TEST(Readout, SuperpositionSplitsFinalPulse) {
  // the echo must trail t4 by more than the split plus half a pulse and half a gate
  const NlpeTimings wide{0.0, 4e-6, 10e-6, 24e-6, 30e-6};
  const Timeline nlpe = build_nlpe(wide, presets(), cfg().signal);
  const Timeline tl = build_superposition_readout(nlpe, 3e-6, 0.5 * pi, cfg().preset("pi32_half"));
  ASSERT_EQ(tl.pulses.size(), 5u);
  const auto& a = tl.pulses[3];
  const auto& b = tl.pulses[4];
  EXPECT_EQ(a.shape, PulseShape::half_pi_pair_member);
  EXPECT_NEAR(b.center_time() - a.center_time(), 3e-6, 1e-15);
  EXPECT_NEAR(angle_distance(b.phase, a.phase + 0.5 * pi), 0.0, 1e-12);
  EXPECT_NEAR(a.nominal_area, 0.5 * pi, 1e-12);
  EXPECT_TRUE(tl.find_marker(MarkerKind::detection_gate, "late"));
  EXPECT_THROW(build_superposition_readout(nlpe, 1e-6, 0.0), ConfigError);
  const Timeline shipped = build_nlpe(cfg().timings, presets(), cfg().signal);
  EXPECT_THROW(build_superposition_readout(shipped, 3e-6, 0.0, cfg().preset("pi32_half")), ConfigError);
}

TEST(Initialization, ThreePhasesOfOneMillisecondPumps) {
  const Timeline tl = build_initialization(cfg().scheme);
  EXPECT_EQ(tl.pulses.size(), 7u * 100 + 6u * 80 + 5u * 80);
  EXPECT_NEAR(tl.total_span, 1.58, 1e-9);
  EXPECT_DOUBLE_EQ(tl.pulses.front().bandwidth, 3e6);
  EXPECT_DOUBLE_EQ(tl.pulses.back().bandwidth, 0.8e6);
}

TEST(Timeline, JsonRoundTrip) {
  const Timeline nlpe = build_nlpe(cfg().timings, presets(), cfg().signal);
  const Timeline tl = build_nlpe_dd(nlpe, build_chs_ur4(1.4, 4, cfg().preset("rf_pi"), 0.2));
  const nlohmann::json doc = to_json(tl);
  const Timeline back = timeline_from_json(doc);
  EXPECT_EQ(to_json(back).dump(), doc.dump());
  ASSERT_EQ(back.pulses.size(), tl.pulses.size());
  for (std::size_t k = 0; k < tl.pulses.size(); ++k) {
    EXPECT_DOUBLE_EQ(back.pulses[k].start_time, tl.pulses[k].start_time);
    EXPECT_DOUBLE_EQ(back.pulses[k].phase, tl.pulses[k].phase);
  }
}

TEST(Timeline, ValidateRejectsEarlyControlPulse) {
  Timeline tl = build_nlpe(cfg().timings, presets(), cfg().signal);
  tl.pulses[0].start_time = -1e-6;
  EXPECT_THROW(validate(tl), ConfigError);
}

TEST(Jitter, DeterministicAndZeroSigmaIsIdentity) {
  const Timeline tl = build_chs_ur4(1.4, 8, cfg().preset("rf_pi"));
  const Timeline a = with_clock_jitter(tl, 1e-5, 3), b = with_clock_jitter(tl, 1e-5, 3);
  for (std::size_t k = 0; k < tl.pulses.size(); ++k) EXPECT_EQ(a.pulses[k].start_time, b.pulses[k].start_time);
  const Timeline z = with_clock_jitter(tl, 0.0, 3);
  for (std::size_t k = 0; k < tl.pulses.size(); ++k) EXPECT_EQ(z.pulses[k].start_time, tl.pulses[k].start_time);
  EXPECT_THROW(with_clock_jitter(tl, -1.0, 3), ConfigError);
}

// Property: UR4 refocusing of a detuned spin coherence degrades monotonically with clock jitter.
TEST(JitterProperty, FidelityDegradesMonotonically) {
  auto subset = std::make_shared<const LevelSubset>(LevelSubset::two_level(cfg().scheme, parse_transition("g3-g4")));
  IonState ion = make_ion(subset, ground(3));
  ion.spin_detuning = 2e3;
  ion.rho.setConstant(0.5);
  const Timeline tl = build_chs_ur4(0.1, 4, cfg().preset("rf_pi"));
  const std::vector<double> probes{tl.total_span};
  PropagatorCache cache;
  EvolveOptions eo;
  eo.cache = &cache;
  const auto reference = evolve(ion, tl, {}, probes, eo)[0].rho;
  double previous = 1.0 + 1e-12;
  for (double sigma : {0.0, 3e-6, 3e-5, 1e-4}) {
    double mean = 0.0;
    const int seeds = 16;
    for (int s = 0; s < seeds; ++s) {
      const auto rho = evolve(ion, with_clock_jitter(tl, sigma, 100 + s), {}, probes, eo)[0].rho;
      mean += (rho * reference).trace().real(); // overlap of pure states
    }
    mean /= seeds;
    EXPECT_LT(mean, previous) << sigma;
    previous = mean;
  }
  EXPECT_LT(previous, 0.9);
}
