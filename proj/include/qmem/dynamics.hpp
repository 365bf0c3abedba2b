#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qmem/levels.hpp"
#include "qmem/pulses.hpp"
#include "qmem/sequences.hpp"
#include "qmem/types.hpp"

namespace qmem {

// ---------------------------------------------------------------------------
// 2x2 building blocks, templated on the real scalar type
// ---------------------------------------------------------------------------

// exp(-i K) for Hermitian K.
template <typename Scalar>
Matrix2c<Scalar> expm_minus_i(const Matrix2c<Scalar>& k) {
  using C = std::complex<Scalar>;
  const Scalar k0 = Scalar(0.5) * (k(0, 0).real() + k(1, 1).real());
  const Scalar kz = Scalar(0.5) * (k(0, 0).real() - k(1, 1).real());
  const C off = k(0, 1);
  const Scalar norm = std::sqrt(kz * kz + std::norm(off));
  const Scalar c = std::cos(norm);
  const Scalar s = norm > Scalar(1e-30) ? std::sin(norm) / norm : Scalar(1);
  const C phase = std::polar(Scalar(1), -k0);
  const C mi(0, -1);
  Matrix2c<Scalar> u;
  u(0, 0) = phase * C(c, -s * kz);
  u(1, 1) = phase * C(c, s * kz);
  u(0, 1) = phase * mi * s * off;
  u(1, 0) = phase * mi * s * std::conj(off);
  return u;
}

// Rotation by `angle` about the equatorial axis at azimuth `axis_phase`, in the (lower, upper) basis.
template <typename Scalar>
Matrix2c<Scalar> equatorial_rotation(Scalar angle, Scalar axis_phase) {
  using C = std::complex<Scalar>;
  const Scalar c = std::cos(angle / 2);
  const Scalar s = std::sin(angle / 2);
  Matrix2c<Scalar> u;
  u << C(c, 0), C(0, -1) * s * std::polar(Scalar(1), -axis_phase),
       C(0, -1) * s * std::polar(Scalar(1), axis_phase), C(c, 0);
  return u;
}

// Two-level Hamiltonian in the (lower, upper) basis for drive amplitude w = Omega e^{i phi}.
template <typename Scalar>
Matrix2c<Scalar> drive_hamiltonian(std::complex<Scalar> w, Scalar eps_lower, Scalar eps_upper) {
  Matrix2c<Scalar> h;
  h << std::complex<Scalar>(eps_lower, 0), Scalar(0.5) * std::conj(w),
       Scalar(0.5) * w, std::complex<Scalar>(eps_upper, 0);
  return h;
}

// ---------------------------------------------------------------------------
// Level subsets and ion state
// ---------------------------------------------------------------------------

enum class LevelRole { storage_ground, spin_partner, signal_excited, auxiliary_excited, other, reservoir };

struct SubsetLevel {
  Level level;
  LevelRole role = LevelRole::other;
};

// Ordered set of levels an ion is simulated on. A reservoir entry collects decay into
// ground levels that are not part of the subset.
class LevelSubset {
public:
  static LevelSubset nlpe(const LevelScheme& scheme, const FourLevelSystem& sys, bool reservoir = true);
  static LevelSubset two_level(const LevelScheme& scheme, Transition t, bool reservoir = false);
  static LevelSubset full(const LevelScheme& scheme, const FourLevelSystem& sys);

  int size() const { return static_cast<int>(levels_.size()); }
  const std::vector<SubsetLevel>& levels() const { return levels_; }
  // -1 when absent.
  int index_of(Level level) const;
  int require_index(Level level) const;
  bool is_excited(int i) const;
  bool has_reservoir() const { return reservoir_index_ >= 0; }
  int reservoir_index() const { return reservoir_index_; }
  // weights(g, e): share of the decay of excited entry e that lands in entry g; columns of
  // excited entries sum to 1.
  const Eigen::MatrixXd& decay_weights() const { return decay_; }

private:
  LevelSubset(std::vector<SubsetLevel> levels, const LevelScheme& scheme, bool reservoir);

  std::vector<SubsetLevel> levels_;
  int reservoir_index_ = -1;
  Eigen::MatrixXd decay_;
};

struct IonState {
  MatrixXcd rho;
  double optical_detuning = 0.0; // Hz
  double spin_detuning = 0.0;    // Hz
  double ee_detuning = 0.0;      // Hz
  std::shared_ptr<const LevelSubset> subset;
  double time = 0.0;             // s
};

IonState make_ion(std::shared_ptr<const LevelSubset> subset, Level initial);

// Rotating-frame level energies of this ion, rad/s.
Eigen::VectorXd frame_energies(const IonState& ion);

struct DecoherenceSpec {
  double optical_dephasing_rate = 0.0; // 1/s
  double spin_dephasing_rate = 0.0;    // 1/s
  double excited_lifetime = std::numeric_limits<double>::infinity(); // s

  bool dissipative() const {
    return optical_dephasing_rate > 0.0 || spin_dephasing_rate > 0.0 || std::isfinite(excited_lifetime);
  }
};

void validate(const DecoherenceSpec& d);

// Pure dephasing rate of coherence (i, j), 1/s, excluding lifetime damping.
double dephasing_rate(const LevelSubset& subset, const DecoherenceSpec& d, int i, int j);

// Closed-form free evolution over `duration`: phase accrual, dephasing and excited decay.
void free_evolve(IonState& ion, const DecoherenceSpec& d, double duration);
// Dissipative part alone (no phase accrual).
void dissipate(MatrixXcd& rho, const LevelSubset& subset, const DecoherenceSpec& d, double duration);

// ---------------------------------------------------------------------------
// Pulse propagation
// ---------------------------------------------------------------------------

struct PropagatorOptions {
  double tolerance = 1e-8;        // accumulated local error per pulse, operator norm
  double samples_per_cycle = 40;  // waveform samples per 2 pi of the fastest phase
  long max_steps = 5'000'000;
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
};

// Unitary over the pulse support on (lower, upper); energies in rad/s.
Matrix2cd pulse_block_propagator(const PulseSpec& pulse, double eps_lower, double eps_upper,
                                 const PropagatorOptions& opts = {}, StepStats* stats = nullptr);

// A pulse acting on a whole subset: unitary, or a superoperator on column-stacked rho when dissipative.
struct PulseMap {
  bool is_unitary = true;
  MatrixXcd matrix;

  MatrixXcd apply(const MatrixXcd& rho) const;
};

PulseMap pulse_propagator(const IonState& ion, const PulseSpec& pulse, const DecoherenceSpec& d = {},
                          const PropagatorOptions& opts = {});

// Memoizes phase-free pulse blocks by waveform and level energies. Thread safe.
class PropagatorCache {
public:
  struct Key {
    std::array<double, 10> values{};
    int shape = 0;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  std::optional<Matrix2cd> find(const Key& key) const;
  void insert(const Key& key, const Matrix2cd& u);
  std::size_t size() const;

private:
  mutable std::mutex mutex_;
  std::unordered_map<Key, Matrix2cd, KeyHash> map_;
};

struct EvolveOptions {
  PropagatorOptions propagator;
  PropagatorCache* cache = nullptr;
};

// Snapshots at the requested probe times, in the given order.
std::vector<IonState> evolve(const IonState& ion, const Timeline& timeline, const DecoherenceSpec& d,
                             std::span<const double> probes, const EvolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct EnsembleSpec {
  int n_ions = 1000;
  double optical_fwhm = 0.0; // Hz
  double spin_fwhm = 0.0;    // Hz
  double ee_fwhm = 0.0;      // Hz
  std::uint64_t seed = 1;
  // Each stratified draw yields `spin_phase_classes` ions whose spin detunings are spread evenly
  // over one period of 1 / spin_phase_interval Hz.
  int spin_phase_classes = 1;
  double spin_phase_interval = 0.0; // s
};

void validate(const EnsembleSpec& spec);

// Latin-hypercube stratified Gaussian detunings from a counter-based generator.
std::vector<IonState> sample_ensemble(const EnsembleSpec& spec, std::shared_ptr<const LevelSubset> subset,
                                      Level initial);

// Fixed-order pairwise sum.
Complex pairwise_sum(std::span<const Complex> values);

Complex ensemble_mean_coherence(std::span<const IonState> ions, std::pair<Level, Level> pair);

// Selected density-matrix elements of every ion at every probe time.
struct EnsembleRecord {
  std::vector<double> times;
  std::vector<std::pair<Level, Level>> elements;
  std::vector<double> optical_detunings; // Hz, per ion
  std::vector<MatrixXcd> values;         // per probe: rows = ions, columns = elements

  int element_index(std::pair<Level, Level> pair) const;
  Complex mean(std::size_t probe, std::pair<Level, Level> pair) const;
};

EnsembleRecord simulate_ensemble(std::span<const IonState> ions, const Timeline& timeline,
                                 const DecoherenceSpec& d, std::span<const double> probes,
                                 const std::vector<std::pair<Level, Level>>& elements,
                                 const EvolveOptions& opts = {});

} // namespace qmem
