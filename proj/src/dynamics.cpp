#include "qmem/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "qmem/random.hpp"

namespace qmem {

// ---------------------------------------------------------------------------
// Level subsets
// ---------------------------------------------------------------------------

LevelSubset::LevelSubset(std::vector<SubsetLevel> levels, const LevelScheme& scheme, bool reservoir)
    : levels_(std::move(levels)) {
  bool any_excited = false;
  for (const auto& l : levels_) any_excited |= l.level.manifold == Manifold::excited;
  if (reservoir && any_excited) {
    reservoir_index_ = static_cast<int>(levels_.size());
    levels_.push_back({Level{Manifold::ground, 0}, LevelRole::reservoir});
  }
  const int d = size();
  decay_ = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    if (!is_excited(j)) continue;
    const int e = levels_[j].level.index;
    const double column = scheme.branching.col(e - 1).sum();
    double kept = 0.0;
    for (int i = 0; i < d; ++i) {
      if (is_excited(i) || i == reservoir_index_) continue;
      decay_(i, j) = scheme.ratio(levels_[i].level.index, e) / column;
      kept += decay_(i, j);
    }
    if (reservoir_index_ >= 0) {
      decay_(reservoir_index_, j) = std::max(0.0, 1.0 - kept);
    } else {
      if (kept <= 0.0) throw ConfigError("excited level has no decay channel inside the subset");
      decay_.col(j) /= kept;
    }
  }
}

LevelSubset LevelSubset::nlpe(const LevelScheme& scheme, const FourLevelSystem& sys, bool reservoir) {
  return LevelSubset({{ground(sys.ground_pair.first), LevelRole::storage_ground},
                      {ground(sys.ground_pair.second), LevelRole::spin_partner},
                      {excited(sys.auxiliary_excited), LevelRole::auxiliary_excited},
                      {excited(sys.signal_excited), LevelRole::signal_excited}},
                     scheme, reservoir);
}

LevelSubset LevelSubset::two_level(const LevelScheme& scheme, Transition t, bool reservoir) {
  const LevelRole upper_role = t.is_spin() ? LevelRole::spin_partner : LevelRole::signal_excited;
  return LevelSubset({{t.lower, LevelRole::storage_ground}, {t.upper, upper_role}}, scheme, reservoir);
}

LevelSubset LevelSubset::full(const LevelScheme& scheme, const FourLevelSystem& sys) {
  std::vector<SubsetLevel> levels;
  for (int g = 1; g <= 6; ++g) {
    LevelRole role = LevelRole::other;
    if (g == sys.ground_pair.first) role = LevelRole::storage_ground;
    if (g == sys.ground_pair.second) role = LevelRole::spin_partner;
    levels.push_back({ground(g), role});
  }
  for (int e = 1; e <= 6; ++e) {
    LevelRole role = LevelRole::other;
    if (e == sys.signal_excited) role = LevelRole::signal_excited;
    if (e == sys.auxiliary_excited) role = LevelRole::auxiliary_excited;
    levels.push_back({excited(e), role});
  }
  return LevelSubset(std::move(levels), scheme, false);
}

int LevelSubset::index_of(Level level) const {
  for (int i = 0; i < size(); ++i)
    if (levels_[i].level == level && levels_[i].role != LevelRole::reservoir) return i;
  return -1;
}

int LevelSubset::require_index(Level level) const {
  const int i = index_of(level);
  if (i < 0)
    throw ConfigError(std::string("level ") + (level.manifold == Manifold::ground ? "g" : "e") +
                      std::to_string(level.index) + " is not in the simulated subset");
  return i;
}

bool LevelSubset::is_excited(int i) const {
  return levels_[i].role != LevelRole::reservoir && levels_[i].level.manifold == Manifold::excited;
}

IonState make_ion(std::shared_ptr<const LevelSubset> subset, Level initial) {
  IonState ion;
  const int i = subset->require_index(initial);
  ion.rho = MatrixXcd::Zero(subset->size(), subset->size());
  ion.rho(i, i) = 1.0;
  ion.subset = std::move(subset);
  return ion;
}

Eigen::VectorXd frame_energies(const IonState& ion) {
  const auto& levels = ion.subset->levels();
  Eigen::VectorXd eps(static_cast<Eigen::Index>(levels.size()));
  for (std::size_t i = 0; i < levels.size(); ++i) {
    double hz = 0.0;
    switch (levels[i].role) {
    case LevelRole::storage_ground:
    case LevelRole::reservoir: hz = 0.0; break;
    case LevelRole::spin_partner: hz = ion.spin_detuning; break;
    case LevelRole::signal_excited: hz = ion.optical_detuning; break;
    case LevelRole::auxiliary_excited: hz = ion.optical_detuning + ion.ee_detuning; break;
    case LevelRole::other: hz = levels[i].level.manifold == Manifold::excited ? ion.optical_detuning : 0.0; break;
    }
    eps(static_cast<Eigen::Index>(i)) = two_pi * hz;
  }
  return eps;
}

// ---------------------------------------------------------------------------
// Free evolution
// ---------------------------------------------------------------------------

void validate(const DecoherenceSpec& d) {
  if (!(d.optical_dephasing_rate >= 0.0) || !(d.spin_dephasing_rate >= 0.0))
    throw ConfigError("dephasing rates must be non-negative");
  if (!(d.excited_lifetime > 0.0)) throw ConfigError("excited lifetime must be positive");
}

double dephasing_rate(const LevelSubset& subset, const DecoherenceSpec& d, int i, int j) {
  if (i == j) return 0.0;
  const bool ei = subset.is_excited(i);
  const bool ej = subset.is_excited(j);
  // Diagonal Lindblad operators sqrt(g)|e><e|, sqrt(g) P_excited and sqrt(gs)|g><g| give these rates.
  if (!ei && !ej) return d.spin_dephasing_rate;
  if (ei && ej) return d.optical_dephasing_rate;
  return d.optical_dephasing_rate + 0.5 * d.spin_dephasing_rate;
}

namespace {

void evolve_closed_form(MatrixXcd& rho, const LevelSubset& subset, const DecoherenceSpec& d,
                        const Eigen::VectorXd* energies, double t) {
  if (t == 0.0) return;
  const int n = subset.size();
  const bool decays = std::isfinite(d.excited_lifetime);
  const double gamma1 = decays ? 1.0 / d.excited_lifetime : 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      const double excited_count = (subset.is_excited(i) ? 1.0 : 0.0) + (subset.is_excited(j) ? 1.0 : 0.0);
      const double damping = dephasing_rate(subset, d, i, j) + 0.5 * excited_count * gamma1;
      Complex factor = damping > 0.0 ? Complex(std::exp(-damping * t), 0.0) : Complex(1.0, 0.0);
      if (energies) factor *= std::polar(1.0, -((*energies)(i) - (*energies)(j)) * t);
      rho(i, j) *= factor;
    }
  }
  if (!decays) return;
  const double survive = std::exp(-t * gamma1);
  const auto& w = subset.decay_weights();
  for (int e = 0; e < n; ++e) {
    if (!subset.is_excited(e)) continue;
    const double lost = rho(e, e).real() * (1.0 - survive);
    rho(e, e) = rho(e, e).real() * survive;
    for (int g = 0; g < n; ++g)
      if (w(g, e) != 0.0) rho(g, g) += w(g, e) * lost;
  }
}

} // namespace

void free_evolve(IonState& ion, const DecoherenceSpec& d, double duration) {
  if (duration < 0.0) throw ConfigError("negative free-evolution interval");
  const Eigen::VectorXd eps = frame_energies(ion);
  evolve_closed_form(ion.rho, *ion.subset, d, &eps, duration);
  ion.time += duration;
}

void dissipate(MatrixXcd& rho, const LevelSubset& subset, const DecoherenceSpec& d, double duration) {
  evolve_closed_form(rho, subset, d, nullptr, duration);
}

// ---------------------------------------------------------------------------
// Pulse propagation
// ---------------------------------------------------------------------------

namespace {

constexpr double gauss_offset = 0.28867513459481287; // sqrt(3) / 6
constexpr double magnus_commutator = 0.14433756729740643; // sqrt(3) / 12

// Fourth-order Magnus step with two Gauss-Legendre nodes.
Matrix2cd magnus_step(const PulseSpec& p, double eps_l, double eps_u, double t, double h) {
  const Matrix2cd h1 = drive_hamiltonian(waveform(p, t + (0.5 - gauss_offset) * h), eps_l, eps_u);
  const Matrix2cd h2 = drive_hamiltonian(waveform(p, t + (0.5 + gauss_offset) * h), eps_l, eps_u);
  const Matrix2cd commutator = h2 * h1 - h1 * h2;
  const Matrix2cd k = (0.5 * h) * (h1 + h2) - Complex(0.0, magnus_commutator * h * h) * commutator;
  if (!k.allFinite()) throw NumericalError("non-finite Hamiltonian in pulse " + p.name);
  return expm_minus_i(k);
}

double fastest_phase_rate(const PulseSpec& p, double eps_l, double eps_u) {
  const double rabi = peak_rabi(p);
  const double sweep = peak_sweep(p) + std::abs(eps_u - eps_l);
  return std::sqrt(rabi * rabi + sweep * sweep);
}

// Adaptive stepping over local times [from, to]; visit(h, U) for every accepted step.
template <class Visit>
void integrate_block(const PulseSpec& p, double eps_l, double eps_u, double from, double to,
                     const PropagatorOptions& o, StepStats* stats, Visit&& visit) {
  const double span = to - from;
  if (span <= 0.0) return;
  const double rate = fastest_phase_rate(p, eps_l, eps_u);
  // each accepted step samples the waveform at four Gauss nodes
  const double h_max = rate > 0.0 ? std::min(span, 4.0 * two_pi / (o.samples_per_cycle * rate)) : span;
  const double h_min = 1e-14 * p.duration;
  double h = std::min(h_max, span / 4.0);
  double t = from;
  long steps = 0;
  while (t < to) {
    const bool last = t + h >= to;
    if (last) h = to - t;
    const Matrix2cd full = magnus_step(p, eps_l, eps_u, t, h);
    const Matrix2cd halves = magnus_step(p, eps_l, eps_u, t + 0.5 * h, 0.5 * h) * magnus_step(p, eps_l, eps_u, t, 0.5 * h);
    const double err = (full - halves).norm();
    const double allowed = o.tolerance * h / p.duration;
    const double factor = err > 0.0 ? std::clamp(0.9 * std::pow(allowed / err, 0.25), 0.2, 4.0) : 4.0;
    if (err <= allowed) {
      visit(h, halves);
      t = last ? to : t + h;
      if (stats) ++stats->accepted;
      h = std::min(h * factor, h_max);
    } else {
      if (stats) ++stats->rejected;
      h *= factor;
      if (h < h_min) throw NumericalError("step-size underflow in pulse " + p.name);
    }
    if (++steps > o.max_steps) throw NumericalError("step budget exhausted in pulse " + p.name);
  }
}

Matrix2cd phase_frame(double phase) {
  Matrix2cd z = Matrix2cd::Identity();
  z(1, 1) = std::polar(1.0, phase);
  return z;
}

MatrixXcd embed(const Matrix2cd& block, int a, int b, const Eigen::VectorXd& eps, double duration) {
  const Eigen::Index n = eps.size();
  MatrixXcd u = MatrixXcd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) u(k, k) = std::polar(1.0, -eps(k) * duration);
  u(a, a) = block(0, 0);
  u(a, b) = block(0, 1);
  u(b, a) = block(1, 0);
  u(b, b) = block(1, 1);
  return u;
}

void conjugate_by(MatrixXcd& rho, const MatrixXcd& u) { rho = u * rho * u.adjoint(); }

// Superoperator of the dissipator over `duration`, acting on column-stacked rho.
MatrixXcd dissipation_superop(const LevelSubset& subset, const DecoherenceSpec& d, double duration) {
  const int n = subset.size();
  MatrixXcd s = MatrixXcd::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      MatrixXcd basis = MatrixXcd::Zero(n, n);
      basis(i, j) = 1.0;
      dissipate(basis, subset, d, duration);
      s.col(i + j * n) = Eigen::Map<const Eigen::VectorXcd>(basis.data(), n * n);
    }
  }
  return s;
}

MatrixXcd unitary_superop(const MatrixXcd& u) {
  const Eigen::Index n = u.rows();
  MatrixXcd s(n * n, n * n);
  const MatrixXcd uc = u.conjugate();
  for (Eigen::Index q = 0; q < n; ++q)
    for (Eigen::Index p = 0; p < n; ++p) s.block(p * n, q * n, n, n) = uc(p, q) * u;
  return s;
}

PropagatorCache::Key cache_key(const PulseSpec& p, double eps_l, double eps_u, const PropagatorOptions& o) {
  PropagatorCache::Key k;
  k.shape = static_cast<int>(p.shape);
  k.values = {p.duration, peak_rabi(p), p.beta, p.mu_chirp, p.bandwidth, p.fwhm, p.center_offset,
              eps_l, eps_u, o.tolerance};
  return k;
}

} // namespace

Matrix2cd pulse_block_propagator(const PulseSpec& pulse, double eps_lower, double eps_upper,
                                 const PropagatorOptions& opts, StepStats* stats) {
  validate(pulse);
  Matrix2cd u = Matrix2cd::Identity();
  integrate_block(pulse, eps_lower, eps_upper, -0.5 * pulse.duration, 0.5 * pulse.duration, opts, stats,
                  [&](double, const Matrix2cd& step) { u = step * u; });
  return u;
}

MatrixXcd PulseMap::apply(const MatrixXcd& rho) const {
  if (is_unitary) return matrix * rho * matrix.adjoint();
  const Eigen::Index n = rho.rows();
  Eigen::VectorXcd v = matrix * Eigen::Map<const Eigen::VectorXcd>(rho.data(), n * n);
  return Eigen::Map<const MatrixXcd>(v.data(), n, n);
}

PulseMap pulse_propagator(const IonState& ion, const PulseSpec& pulse, const DecoherenceSpec& d,
                          const PropagatorOptions& opts) {
  validate(pulse);
  validate(d);
  const auto& subset = *ion.subset;
  const int a = subset.require_index(pulse.target.lower);
  const int b = subset.require_index(pulse.target.upper);
  const Eigen::VectorXd eps = frame_energies(ion);
  PulseMap map;
  if (!d.dissipative()) {
    map.matrix = embed(pulse_block_propagator(pulse, eps(a), eps(b), opts), a, b, eps, pulse.duration);
    return map;
  }
  map.is_unitary = false;
  const int n = subset.size();
  map.matrix = MatrixXcd::Identity(n * n, n * n);
  integrate_block(pulse, eps(a), eps(b), -0.5 * pulse.duration, 0.5 * pulse.duration, opts, nullptr,
                  [&](double h, const Matrix2cd& step) {
                    const MatrixXcd half = dissipation_superop(subset, d, 0.5 * h);
                    map.matrix = half * unitary_superop(embed(step, a, b, eps, h)) * half * map.matrix;
                  });
  return map;
}

std::size_t PropagatorCache::KeyHash::operator()(const Key& k) const {
  std::uint64_t h = static_cast<std::uint64_t>(k.shape) * 0x9e3779b97f4a7c15ULL;
  for (double v : k.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

std::optional<Matrix2cd> PropagatorCache::find(const Key& key) const {
  std::lock_guard lock(mutex_);
  const auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void PropagatorCache::insert(const Key& key, const Matrix2cd& u) {
  std::lock_guard lock(mutex_);
  map_.emplace(key, u);
}

std::size_t PropagatorCache::size() const {
  std::lock_guard lock(mutex_);
  return map_.size();
}

// ---------------------------------------------------------------------------
// Timeline execution
// ---------------------------------------------------------------------------

namespace {

struct PulseRunner {
  IonState& state;
  const DecoherenceSpec& d;
  const EvolveOptions& opts;
  Eigen::VectorXd eps;

  // Propagates through local times [from, to] of pulse p.
  void run(const PulseSpec& p, double from, double to) {
    const auto& subset = *state.subset;
    const int a = subset.require_index(p.target.lower);
    const int b = subset.require_index(p.target.upper);
    const bool whole = from <= -0.5 * p.duration && to >= 0.5 * p.duration;
    if (!d.dissipative()) {
      Matrix2cd block;
      if (whole && opts.cache) {
        const auto key = cache_key(p, eps(a), eps(b), opts.propagator);
        if (auto hit = opts.cache->find(key)) {
          block = *hit;
        } else {
          PulseSpec bare = p;
          bare.phase = 0.0;
          block = pulse_block_propagator(bare, eps(a), eps(b), opts.propagator);
          opts.cache->insert(key, block);
        }
        const Matrix2cd z = phase_frame(p.phase);
        block = z * block * z.adjoint();
      } else {
        block = Matrix2cd::Identity();
        integrate_block(p, eps(a), eps(b), from, to, opts.propagator, nullptr,
                        [&](double, const Matrix2cd& step) { block = step * block; });
      }
      conjugate_by(state.rho, embed(block, a, b, eps, to - from));
      return;
    }
    integrate_block(p, eps(a), eps(b), from, to, opts.propagator, nullptr, [&](double h, const Matrix2cd& step) {
      dissipate(state.rho, subset, d, 0.5 * h);
      conjugate_by(state.rho, embed(step, a, b, eps, h));
      dissipate(state.rho, subset, d, 0.5 * h);
    });
  }
};

} // namespace

std::vector<IonState> evolve(const IonState& ion, const Timeline& timeline, const DecoherenceSpec& d,
                             std::span<const double> probes, const EvolveOptions& opts) {
  validate(timeline);
  validate(d);
  std::vector<const PulseSpec*> pulses;
  if (timeline.signal) pulses.push_back(&*timeline.signal);
  for (const auto& p : timeline.pulses) pulses.push_back(&p);
  std::stable_sort(pulses.begin(), pulses.end(),
                   [](const PulseSpec* x, const PulseSpec* y) { return x->start_time < y->start_time; });
  for (std::size_t i = 1; i < pulses.size(); ++i)
    if (pulses[i]->start_time < pulses[i - 1]->end_time()) throw ConfigError("overlapping pulses in timeline");

  const double begin = timeline.begin_time();
  const double end = timeline.end_time();
  const double slack = 1e-12 * std::max(1.0, std::abs(end - begin));
  for (double t : probes)
    if (!(t >= begin - slack && t <= end + slack)) throw ConfigError("probe time outside the timeline span");

  std::vector<std::size_t> order(probes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return probes[x] < probes[y]; });

  IonState state = ion;
  state.time = begin;
  PulseRunner runner{state, d, opts, frame_energies(state)};
  std::vector<IonState> out(probes.size());
  std::size_t k = 0;
  const auto record = [&](std::size_t idx) {
    out[idx] = state;
    out[idx].time = probes[idx];
  };
  const auto free_to = [&](double t) {
    if (t > state.time) free_evolve(state, d, t - state.time);
  };

  for (const PulseSpec* p : pulses) {
    while (k < order.size() && probes[order[k]] <= p->start_time) {
      free_to(probes[order[k]]);
      record(order[k++]);
    }
    free_to(p->start_time);
    const double center = p->center_time();
    double local = -0.5 * p->duration;
    while (k < order.size() && probes[order[k]] < p->end_time()) {
      const double stop = probes[order[k]] - center;
      runner.run(*p, local, stop);
      local = stop;
      state.time = probes[order[k]];
      record(order[k++]);
    }
    runner.run(*p, local, 0.5 * p->duration);
    state.time = p->end_time();
  }
  while (k < order.size()) {
    free_to(probes[order[k]]);
    record(order[k++]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

void validate(const EnsembleSpec& spec) {
  if (spec.n_ions < 1) throw ConfigError("ensemble needs at least one ion");
  if (!(spec.optical_fwhm >= 0.0) || !(spec.spin_fwhm >= 0.0) || !(spec.ee_fwhm >= 0.0))
    throw ConfigError("inhomogeneous widths must be non-negative");
  if (spec.spin_phase_classes < 1 || spec.n_ions % spec.spin_phase_classes != 0)
    throw ConfigError("ion count must be a multiple of the spin phase classes");
  if (spec.spin_phase_classes > 1 && !(spec.spin_phase_interval > 0.0))
    throw ConfigError("spin phase classes need a positive reference interval");
}

std::vector<IonState> sample_ensemble(const EnsembleSpec& spec, std::shared_ptr<const LevelSubset> subset,
                                      Level initial) {
  validate(spec);
  const int classes = spec.spin_phase_classes;
  const std::size_t base = static_cast<std::size_t>(spec.n_ions / classes);
  const std::array<double, 3> sigma = {spec.optical_fwhm / fwhm_per_sigma, spec.spin_fwhm / fwhm_per_sigma,
                                       spec.ee_fwhm / fwhm_per_sigma};

  std::array<std::vector<double>, 3> draws;
  for (std::uint64_t m = 0; m < 3; ++m) {
    auto& out = draws[m];
    out.assign(base, 0.0);
    if (sigma[m] == 0.0) continue;
    // random stratum assignment, then a uniform position inside the stratum
    std::vector<std::size_t> perm(base);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> keys(base);
    for (std::size_t i = 0; i < base; ++i) keys[i] = counter_uniform(spec.seed, 0x100 + m, i);
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) { return keys[x] < keys[y]; });
    for (std::size_t i = 0; i < base; ++i) {
      const double u = (static_cast<double>(perm[i]) + counter_uniform(spec.seed, 0x200 + m, i)) / base;
      out[i] = sigma[m] * normal_quantile(u);
    }
  }

  const IonState proto = make_ion(std::move(subset), initial);
  std::vector<IonState> ions;
  ions.reserve(static_cast<std::size_t>(spec.n_ions));
  for (std::size_t i = 0; i < base; ++i) {
    for (int j = 0; j < classes; ++j) {
      IonState ion = proto;
      ion.optical_detuning = draws[0][i];
      ion.spin_detuning = draws[1][i];
      ion.ee_detuning = draws[2][i];
      if (classes > 1) ion.spin_detuning += (j - 0.5 * (classes - 1)) / (classes * spec.spin_phase_interval);
      ions.push_back(std::move(ion));
    }
  }
  return ions;
}

Complex pairwise_sum(std::span<const Complex> values) {
  if (values.size() <= 8) {
    Complex s = 0.0;
    for (const auto& v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Complex ensemble_mean_coherence(std::span<const IonState> ions, std::pair<Level, Level> pair) {
  if (ions.empty()) throw ConfigError("empty ensemble");
  std::vector<Complex> values(ions.size());
  for (std::size_t i = 0; i < ions.size(); ++i) {
    const auto& s = *ions[i].subset;
    values[i] = ions[i].rho(s.require_index(pair.first), s.require_index(pair.second));
  }
  return pairwise_sum(values) / static_cast<double>(ions.size());
}

int EnsembleRecord::element_index(std::pair<Level, Level> pair) const {
  for (std::size_t k = 0; k < elements.size(); ++k)
    if (elements[k] == pair) return static_cast<int>(k);
  throw ConfigError("density-matrix element was not recorded");
}

Complex EnsembleRecord::mean(std::size_t probe, std::pair<Level, Level> pair) const {
  const auto& m = values.at(probe);
  if (m.rows() == 0) throw ConfigError("empty ensemble");
  const Eigen::VectorXcd col = m.col(element_index(pair));
  return pairwise_sum(std::span<const Complex>(col.data(), static_cast<std::size_t>(col.size()))) /
         static_cast<double>(m.rows());
}

EnsembleRecord simulate_ensemble(std::span<const IonState> ions, const Timeline& timeline,
                                 const DecoherenceSpec& d, std::span<const double> probes,
                                 const std::vector<std::pair<Level, Level>>& elements, const EvolveOptions& opts) {
  if (ions.empty()) throw ConfigError("empty ensemble");
  EnsembleRecord rec;
  rec.times.assign(probes.begin(), probes.end());
  rec.elements = elements;
  const auto n = static_cast<Eigen::Index>(ions.size());
  rec.values.assign(probes.size(), MatrixXcd::Zero(n, static_cast<Eigen::Index>(elements.size())));
  rec.optical_detunings.resize(ions.size());

  std::vector<std::pair<int, int>> idx;
  for (const auto& [x, y] : elements)
    idx.emplace_back(ions[0].subset->require_index(x), ions[0].subset->require_index(y));

  std::string failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      const auto& ion = ions[static_cast<std::size_t>(i)];
      rec.optical_detunings[static_cast<std::size_t>(i)] = ion.optical_detuning;
      const auto snaps = evolve(ion, timeline, d, probes, opts);
      for (std::size_t p = 0; p < snaps.size(); ++p)
        for (std::size_t k = 0; k < idx.size(); ++k)
          rec.values[p](i, static_cast<Eigen::Index>(k)) = snaps[p].rho(idx[k].first, idx[k].second);
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw NumericalError("ensemble propagation failed: " + failure);
  return rec;
}

} // namespace qmem
