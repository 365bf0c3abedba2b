#include <gtest/gtest.h>

#include <cmath>

#include "qmem/photonstats.hpp"
#include "qmem/random.hpp"
#include "qmem/types.hpp"

using namespace qmem;

TEST(Fidelity, TotalFidelityOfReferenceStates) {
  EXPECT_NEAR(total_fidelity(0.927, 0.927, 0.858, 0.856), 0.8803, 5e-5);
  EXPECT_DOUBLE_EQ(total_fidelity(1, 1, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(total_fidelity(0.5, 0.5, 0.5, 0.5), 0.5);
  EXPECT_THROW(total_fidelity(1.2, 1, 1, 1), ConfigError);
}

TEST(Fidelity, BasisAndVisibility) {
  EXPECT_NEAR(basis_fidelity(11.3, 1.0), 12.3 / 13.3, 1e-15);
  EXPECT_NEAR(basis_fidelity(11.3, 1.0), 0.9248, 5e-5);
  EXPECT_DOUBLE_EQ(visibility_fidelity(5.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(visibility_fidelity(3.0, 3.0), 0.5);
  // F = 0.858 inverts to V = 0.716
  EXPECT_NEAR(visibility(0.858, 0.142), 0.716, 1e-12);
  EXPECT_THROW(visibility(0.0, 0.0), ConfigError);
  EXPECT_THROW(visibility(1.0, 2.0), ConfigError);
  EXPECT_THROW(basis_fidelity(0.0, 0.0), ConfigError);
}

TEST(Fidelity, SingleTrialSnrScaling) {
  // SNR per mean input photon
  EXPECT_NEAR(5.54 / 4.14, 1.34, 5e-3);
}

// Property: an SNR s gives the same fidelity through the basis formula and through V = s / (s + 2).
TEST(FidelityProperty, BasisAndVisibilityAgree) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    const double s = 100.0 * counter_uniform(77, 0, k);
    const double v = s / (s + 2.0);
    EXPECT_NEAR(basis_fidelity(s, 1.0), visibility_fidelity(1.0 + v, 1.0 - v), 1e-13) << s;
    EXPECT_NEAR(basis_fidelity(s, 1.0), (s + 1.0) / (s + 2.0), 1e-13);
  }
}

TEST(ClassicalBound, SinglePhotonLimit) {
  // acceptance within the one-photon class
  EXPECT_NEAR(classical_bound(1e-3, 1e-4), 2.0 / 3.0, 1e-3);
  EXPECT_NEAR(classical_bound(1e-5, 1e-6), 2.0 / 3.0, 1e-5);
}

TEST(ClassicalBound, FullAcceptanceIsPoissonSeries) {
  for (double mu : {0.3, 1.16, 4.0}) {
    long double sum = 0.0L, p = std::exp(-static_cast<long double>(mu));
    for (int n = 0; n < 200; ++n) {
      sum += p * (n + 1.0L) / (n + 2.0L);
      p *= mu / (n + 1.0L);
    }
    EXPECT_NEAR(classical_bound(mu, 1.0), static_cast<double>(sum), 1e-12) << mu;
  }
}

TEST(ClassicalBound, ReferencePoint) {
  // logged discrepancy path: the value is reported, not forced
  const double b = classical_bound(1.16, 0.082);
  EXPECT_GT(b, 2.0 / 3.0);
  EXPECT_LT(b, 1.0);
  EXPECT_THROW(classical_bound(0.0, 0.5), ConfigError);
  EXPECT_THROW(classical_bound(1.0, 1.5), ConfigError);
}

// Property: the bound rises with the mean photon number and falls with the accepted fraction.
TEST(ClassicalBoundProperty, Monotonicity) {
  for (double eta : {0.01, 0.082, 0.5, 1.0}) {
    double prev = 0.0;
    for (int k = 1; k <= 60; ++k) {
      const double b = classical_bound(0.05 * k, eta);
      EXPECT_GE(b, prev - 1e-12) << eta << " " << 0.05 * k;
      prev = b;
    }
  }
  for (double mu : {0.2, 1.16, 3.0}) {
    double prev = 1.0;
    for (int k = 1; k <= 50; ++k) {
      const double b = classical_bound(mu, 0.02 * k);
      EXPECT_LE(b, prev + 1e-12) << mu << " " << 0.02 * k;
      prev = b;
    }
  }
}

TEST(ExpectedFidelity, NoiselessIsPerfect) {
  for (double mu : {0.01, 1.16, 5.0}) EXPECT_DOUBLE_EQ(expected_fidelity(mu, 0.082, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(expected_fidelity(1.0, 1.0, 0.0), 1.0);
}

TEST(ExpectedFidelity, ReferenceOperatingPoint) {
  const double noise = 1.18 * 0.082 / 11.3;
  EXPECT_NEAR(expected_fidelity(1.16, 0.082, noise), 0.880, 0.021);
  // oracle: basis S = mu eta; superposition c_max = S / 2 + N, c_min = N
  const double s = 1.16 * 0.082;
  const double fb = (s + noise) / (s + 2 * noise);
  const double fv = 0.5 * (1.0 + (0.5 * s) / (0.5 * s + 2 * noise));
  EXPECT_NEAR(expected_fidelity(1.16, 0.082, noise), fb / 3 + 2 * fv / 3, 1e-14);
}

TEST(ExpectedFidelity, MonotoneInMeanPhotonNumber) {
  double prev = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double f = expected_fidelity(0.05 * k, 0.082, 0.00856);
    EXPECT_GT(f, prev);
    prev = f;
  }
}

TEST(Crossover, EdgeCases) {
  const double noise = 1.18 * 0.082 / 11.3;
  const double mu = crossover_mu(0.082, noise);
  EXPECT_GT(mu, 0.0);
  EXPECT_LT(mu, 1.16);
  EXPECT_NEAR(expected_fidelity(mu, 0.082, noise), classical_bound(mu, 0.082), 1e-3);
  EXPECT_LT(crossover_mu(0.082, 1e-9), 1e-3);
  EXPECT_THROW(crossover_mu(0.082, 10.0), NumericalError);
}

TEST(Counts, DeterministicPerSeed) {
  const QubitRun run{QubitState::e_plus_l, 1.16, 0.082, 0.00856, 35000, 0.0};
  const BinModel m = qubit_bin_model(run);
  const CountHistogram a = simulate_counts(m, run.n_trials, 9), b = simulate_counts(m, run.n_trials, 9);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_NE(a.counts, simulate_counts(m, run.n_trials, 10).counts);
  EXPECT_EQ(a.bin_edges.size(), a.counts.size() + 1);
  EXPECT_EQ(parse_qubit_state(to_string(QubitState::e_plus_il)), QubitState::e_plus_il);
  EXPECT_THROW(parse_qubit_state("x"), ConfigError);
}

TEST(Counts, SnrFromCountsEdges) {
  const SnrResult z = snr_from_counts(10.0, 0.0);
  EXPECT_TRUE(z.zero_noise);
  EXPECT_TRUE(std::isinf(z.snr));
  const SnrResult c = snr_from_counts(3.0, 5.0);
  EXPECT_TRUE(c.clamped);
  EXPECT_EQ(c.snr, 0.0);
  EXPECT_THROW(snr_from_counts(-1.0, 1.0), ConfigError);
}

// Property: seeded counts reproduce the analytic SNR mean and the Poisson-propagated spread.
TEST(CountsProperty, SnrPipelineMatchesPoissonPropagation) {
  const QubitRun run{QubitState::e, 1.18, 0.082, 1.18 * 0.082 / 11.3, 35000, 0.0};
  const BinModel m = qubit_bin_model(run);
  const CountHistogram probe = simulate_counts(m, run.n_trials, 0);
  const Window& sw = probe.window("early");
  const Window& nw = probe.window("noise");
  double s = 0.0, ns = 0.0, nr = 0.0;
  for (std::size_t k = 0; k < m.signal.size(); ++k) {
    const double center = 0.5 * (m.bin_edges[k] + m.bin_edges[k + 1]);
    if (center >= sw.start && center < sw.start + sw.width) {
      s += m.signal[k] * run.n_trials;
      ns += m.noise[k] * run.n_trials;
    }
    if (center >= nw.start && center < nw.start + nw.width) nr += (m.signal[k] + m.noise[k]) * run.n_trials;
  }
  const double scale = sw.width / nw.width;
  const double expected = s / ns;
  const double var = (s + ns) / (ns * ns) + (s + ns) * (s + ns) * scale * scale * nr / std::pow(scale * nr, 4);
  EXPECT_NEAR(scale * nr / ns, 1.0, 1e-9);

  const int reps = 200;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double v = snr(simulate_counts(m, run.n_trials, 1000 + r), "early", "noise").snr;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / reps;
  const double variance = (sum2 - reps * mean * mean) / (reps - 1);
  EXPECT_NEAR(mean / expected, 1.0, 0.02);
  EXPECT_NEAR(variance / var, 1.0, 0.2);
}
