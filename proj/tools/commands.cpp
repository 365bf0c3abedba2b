#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "qmem/config.hpp"
#include "qmem/dynamics.hpp"
#include "qmem/echo.hpp"
#include "qmem/models.hpp"
#include "qmem/photonstats.hpp"
#include "qmem/random.hpp"
#include "qmem/sequences.hpp"

namespace qmem::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json versions() {
  return {{"qmem", QMEM_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"compiler", __VERSION__}};
}

// Owns the output directory of one command; every file is recorded in the manifest.
class Output {
public:
  Output(const CliOptions& o, std::string command) : dir_(o.out), command_(std::move(command)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_.string());
  }

  void text(const std::string& name, const std::string& body) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir_ / name).string());
    f << body;
    files_.push_back({{"file", name}, {"fnv1a", fnv1a(body)}});
  }

  void json_file(const std::string& name, const json& doc) { text(name, doc.dump(2) + "\n"); }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows) {
    std::ostringstream s;
    for (std::size_t i = 0; i < header.size(); ++i) s << (i ? "," : "") << header[i];
    s << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) s << (i ? "," : "") << number(row[i]);
      s << "\n";
    }
    text(name, s.str());
  }

  void manifest(const std::string& config_hash, const std::string& config_source, std::optional<std::uint64_t> seed,
                const json& parameters) {
    json m = {{"command", command_},
              {"config_hash", config_hash},
              {"config_source", config_source},
              {"seed", seed ? json(*seed) : json(nullptr)},
              {"parameters", parameters},
              {"versions", versions()},
              {"outputs", files_}};
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    if (!f) throw ConfigError("cannot write manifest");
    f << m.dump(2) << "\n";
  }

private:
  fs::path dir_;
  std::string command_;
  json files_ = json::array();
};

RunConfig load(const CliOptions& o) {
  RunConfig c = load_run_config(o.config.empty() ? default_config_path() : o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.ions) c.ensemble.n_ions = *o.ions;
  if (o.tau) c.dd.tau = *o.tau;
  if (o.n_pulses) c.dd.n_pulses = *o.n_pulses;
  if (o.delta) c.dd.delta = *o.delta;
  if (o.mu) c.photon.mu_q = *o.mu;
  if (o.eta) c.photon.eta = *o.eta;
  c.ensemble.seed = c.seed;
  validate(c.ensemble);
  if (c.dd.n_pulses < 0) throw ConfigError("pulse count must be non-negative");
  return c;
}

std::uint64_t require_seed(const CliOptions& o, const RunConfig& c) {
  if (o.seed) return *o.seed;
  if (c.document.contains("seed")) return c.seed;
  throw ConfigError("stochastic command needs --seed or a seed in the config");
}

json parameters(const CliOptions& o) {
  json p = json::object();
  if (o.ions) p["ions"] = *o.ions;
  if (o.tau) p["tau"] = *o.tau;
  if (o.n_pulses) p["n_pulses"] = *o.n_pulses;
  if (o.delta) p["delta"] = *o.delta;
  if (o.mu) p["mu"] = *o.mu;
  if (o.eta) p["eta"] = *o.eta;
  if (o.noise) p["noise"] = *o.noise;
  return p;
}

std::vector<std::vector<double>> field_rows(const std::vector<double>& t, const std::vector<Complex>& a) {
  std::vector<std::vector<double>> rows;
  rows.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) rows.push_back({t[i], a[i].real(), a[i].imag(), std::norm(a[i])});
  return rows;
}

std::vector<std::vector<double>> histogram_rows(const CountHistogram& h) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    rows.push_back({h.bin_edges[i], h.bin_edges[i + 1], static_cast<double>(h.counts[i])});
  return rows;
}

json feature_json(const FeatureMetrics& m, const AbsorptionProfile& p) {
  return {{"feature_center_hz", m.center}, {"feature_fwhm_hz", m.width},     {"feature_peak", m.peak},
          {"window_width_hz", m.window_width}, {"floor", m.floor},          {"pulses_applied", p.pulses_applied},
          {"converged", p.converged},           {"last_change", p.last_change}};
}

} // namespace

void cmd_pulse(const CliOptions& o) {
  const RunConfig cfg = load(o);
  PulseSpec p = cfg.preset(o.preset);
  p.start_time = 0.0;
  if (o.points < 1) throw ConfigError("--points must be at least 1");
  if (!(o.amplitude_error >= 0.0 && o.amplitude_error < 1.0)) throw ConfigError("amplitude error must lie in [0, 1)");

  const double half_span = p.bandwidth > 0.0 ? 0.4 * p.bandwidth : 1.0 / p.duration;
  std::vector<double> scales{1.0};
  if (o.amplitude_error > 0.0) scales = {1.0 - o.amplitude_error, 1.0, 1.0 + o.amplitude_error};

  std::vector<std::vector<double>> rows;
  double worst = 1.0, worst_nominal = 1.0, largest = 0.0, total = 0.0;
  for (double scale : scales) {
    PulseSpec q = p;
    q.amplitude_scale *= scale;
    for (int i = 0; i < o.points; ++i) {
      const double det = o.points == 1 ? 0.0 : -half_span + 2.0 * half_span * i / (o.points - 1);
      const Matrix2cd u = pulse_block_propagator(q, 0.0, two_pi * det);
      const double inversion = std::norm(u(1, 0));
      rows.push_back({det, scale, inversion});
      worst = std::min(worst, inversion);
      if (scale == 1.0) worst_nominal = std::min(worst_nominal, inversion);
      largest = std::max(largest, inversion);
      total += inversion;
    }
  }

  Output out(o, "pulse");
  out.csv("pulse_inversion.csv", {"detuning_hz", "amplitude_scale", "inversion"}, rows);

  std::vector<std::vector<double>> wave;
  const int samples = 400;
  for (int i = 0; i <= samples; ++i) {
    const double t = -0.5 * p.duration + p.duration * i / samples;
    const Complex w = waveform(p, t);
    wave.push_back({t, w.real(), w.imag()});
  }
  out.csv("pulse_waveform.csv", {"t_s", "re_rad_per_s", "im_rad_per_s"}, wave);

  json report = {{"preset", to_json(p)},
                 {"detuning_half_span_hz", half_span},
                 {"points", o.points},
                 {"amplitude_scales", scales},
                 {"worst_inversion", worst},
                 {"worst_inversion_nominal_amplitude", worst_nominal},
                 {"mean_inversion", total / static_cast<double>(rows.size())},
                 {"identity", largest < 1e-12}};
  const bool adiabatic = (p.shape == PulseShape::chs || p.shape == PulseShape::half_pi_pair_member) &&
                         p.omega0 * p.amplitude_scale > 0.0;
  if (adiabatic) {
    const ChsParams c = chs_params(p);
    report["adiabaticity_margin"] = adiabaticity_margin(c);
    report["axis_phase_rad"] = chs_axis_phase(c);
  }
  out.json_file("pulse_report.json", report);
  json params = parameters(o);
  params["preset"] = o.preset;
  params["points"] = o.points;
  params["amplitude_error"] = o.amplitude_error;
  out.manifest(cfg.hash, cfg.source, std::nullopt, params);
}

void cmd_memory(const CliOptions& o) {
  RunConfig cfg = load(o);
  const std::uint64_t seed = require_seed(o, cfg);
  if (o.protocol != "nlpe" && o.protocol != "nlpe_dd") throw ConfigError("unknown protocol " + o.protocol);
  const bool with_dd = o.protocol == "nlpe_dd" && cfg.dd.n_pulses > 0;

  // Spectral preparation of the storage line.
  const Timeline init = build_initialization(cfg.scheme, cfg.init_reps, cfg.init_pumps);
  const AbsorptionProfile profile = run_initialization_rate_equations(cfg.scheme, cfg.system, init, cfg.init_model);
  const FeatureMetrics feature = measure_feature(profile);

  const NlpePresets presets{cfg.preset("pi43"), cfg.preset("pi32")};
  const Timeline nlpe = build_nlpe(cfg.timings, presets, cfg.signal, cfg.readout.width);
  Timeline tl = nlpe;
  if (with_dd) {
    PulseSpec rf = cfg.preset("rf_pi");
    rf.amplitude_scale *= 1.0 + cfg.dd.amplitude_error;
    tl = build_nlpe_dd(nlpe, build_chs_ur4(cfg.dd.tau, cfg.dd.n_pulses, rf, cfg.dd.delta));
  }

  EnsembleSpec es = cfg.ensemble;
  if (es.spin_phase_classes > 1) es.spin_phase_interval = with_dd ? cfg.dd.tau : cfg.timings.t2 - cfg.timings.t1;
  auto subset = std::make_shared<const LevelSubset>(LevelSubset::nlpe(cfg.scheme, cfg.system));
  const auto ions = sample_ensemble(es, subset, ground(cfg.system.ground_pair.first));

  PropagatorCache cache;
  EvolveOptions eo;
  eo.cache = &cache;
  const double te = tl.timings->echo_time();
  const std::pair<Level, Level> signal_pair{ground(cfg.system.ground_pair.first), excited(cfg.system.signal_excited)};
  const EchoField echo = emit_echo(ions, tl, cfg.decoherence, signal_pair,
                                   {te - 0.5 * cfg.readout.width, te + 0.5 * cfg.readout.width},
                                   cfg.readout.grid_step, eo);
  const double efficiency = microscopic_efficiency(echo);

  // Pulse-error noise: signal-free run without decoherence, read after the second spin-partner transfer.
  double noise_rate = 0.0;
  if (with_dd) {
    Timeline dark = tl;
    dark.signal.reset();
    const double probe = tl.timings->t3 + 0.5 * presets.pi43.duration;
    const Level e = excited(cfg.system.signal_excited);
    const std::vector<double> probes{probe};
    const auto rec = simulate_ensemble(ions, dark, DecoherenceSpec{}, probes, {{e, e}}, eo);
    noise_rate = dd_noise_rate(rec, 0, cfg.scheme, cfg.system, cfg.photon.collection_efficiency);
  }

  EfficiencyBudget budget = cfg.budget;
  budget.t31 = cfg.timings.t3 - cfg.timings.t1;
  budget.t42 = cfg.timings.t4 - cfg.timings.t2;

  // Photon counting on the simulated efficiency.
  const double eta = std::clamp(efficiency, 0.0, 1.0);
  const double noise = cfg.photon.noise_per_window() + noise_rate;
  QubitRun run{QubitState::e, cfg.photon.mu_q, eta, noise, cfg.photon.n_trials, 0.0};
  const TimeBinLayout layout{cfg.readout.splitting, cfg.readout.width, cfg.photon.bin_width};
  const CountHistogram h = simulate_counts(qubit_bin_model(run, layout), run.n_trials, counter_hash(seed, 0x70c, 0));

  Output out(o, "memory");
  out.json_file("timeline.json", to_json(tl));
  out.csv("echo.csv", {"t_s", "re", "im", "intensity"}, field_rows(echo.times, echo.amplitude));
  out.csv("input_reference.csv", {"t_s", "re", "im", "intensity"},
          field_rows(echo.reference_times, echo.input_reference));
  out.csv("histogram.csv", {"bin_start", "bin_end", "counts"}, histogram_rows(h));

  json report = {
      {"protocol", o.protocol},
      {"n_ions", static_cast<int>(ions.size())},
      {"echo_time_s", te},
      {"echo_peak_time_s", echo.peak_time()},
      {"reference_peak", echo.reference_peak},
      {"microscopic_efficiency", efficiency},
      {"analytic_efficiency_rephasing", analytic_efficiency(budget)},
      {"initialization", feature_json(feature, profile)},
      {"storage_population_at_line", profile.class_populations(0.0)(cfg.system.ground_pair.first - 1)},
      {"dd", {{"enabled", with_dd}, {"tau_s", cfg.dd.tau}, {"n_pulses", with_dd ? cfg.dd.n_pulses : 0},
              {"delta_rad", cfg.dd.delta}, {"amplitude_error", cfg.dd.amplitude_error},
              {"noise_per_trial", noise_rate}}},
      {"photon", {{"mu_q", cfg.photon.mu_q}, {"noise_per_window", noise}, {"n_trials", cfg.photon.n_trials},
                  {"expected_fidelity", expected_fidelity(cfg.photon.mu_q, eta, noise)},
                  {"snr_early", to_json(snr(h, "early", "noise"))}}},
      {"propagator_cache_entries", cache.size()}};
  out.json_file("memory_report.json", report);
  json params = parameters(o);
  params["protocol"] = o.protocol;
  out.manifest(cfg.hash, cfg.source, seed, params);
}

void cmd_fit(const CliOptions& o) {
  const RunConfig cfg = load(o);
  if (o.data.empty()) throw ConfigError("fit needs --data");
  if (!fs::exists(o.data)) throw ConfigError("cannot read data file " + o.data);

  Output out(o, "fit");
  json report = {{"model", o.model}, {"data", fs::path(o.data).filename().string()}};
  if (o.model == "mims" || o.model == "mims_tail") {
    const auto points = read_decay_csv(o.data);
    DecayFit fit;
    if (o.model == "mims") {
      if (o.power != "amplitude" && o.power != "intensity") throw ConfigError("unknown power " + o.power);
      fit = fit_mims(points, o.power == "amplitude" ? ModelPower::amplitude : ModelPower::intensity);
    } else {
      fit = fit_tail(points, o.t_min);
      report["t_min_s"] = o.t_min;
    }
    std::vector<std::vector<double>> rows;
    for (const auto& p : points) rows.push_back({p.t, p.value, p.sigma, fit.evaluate(p.t)});
    out.csv("fit_curve.csv", {"t_s", "value", "sigma", "model"}, rows);
    report["fit"] = to_json(fit);
  } else if (o.model == "nlpe_surface") {
    const auto points = read_surface_csv(o.data);
    SurfaceFitOptions so;
    so.d = cfg.budget.d;
    so.measured_eta = o.measured_eta;
    const NlpeFit fit = fit_nlpe_surface(points, so);
    report["fit"] = to_json(fit);
    report["d"] = so.d;
  } else {
    throw ConfigError("unknown fit model " + o.model);
  }
  out.json_file("fit_report.json", report);
  json params = parameters(o);
  params["model"] = o.model;
  params["power"] = o.power;
  params["data"] = fs::path(o.data).filename().string();
  if (o.measured_eta) params["measured_eta"] = *o.measured_eta;
  out.manifest(cfg.hash, cfg.source, std::nullopt, params);
}

void cmd_bounds(const CliOptions& o) {
  const RunConfig cfg = load(o);
  const std::uint64_t seed = require_seed(o, cfg);
  const double eta = cfg.photon.eta;
  const double noise = o.noise ? *o.noise : cfg.photon.noise_per_window();
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");

  std::vector<double> grid;
  if (o.mu) {
    grid = {*o.mu};
  } else {
    const auto& b = cfg.bounds;
    if (!(b.mu_min > 0.0 && b.mu_max >= b.mu_min && b.points >= 1)) throw ConfigError("invalid bounds grid");
    for (int i = 0; i < b.points; ++i)
      grid.push_back(b.points == 1 ? b.mu_min : b.mu_min + (b.mu_max - b.mu_min) * i / (b.points - 1));
  }
  std::vector<std::vector<double>> rows;
  for (double mu : grid) rows.push_back({mu, classical_bound(mu, eta), expected_fidelity(mu, eta, noise)});

  json crossover = {{"found", true}};
  try {
    crossover["mu"] = crossover_mu(eta, noise);
  } catch (const NumericalError&) {
    crossover = {{"found", false}, {"mu", nullptr}};
  }

  // Seeded count simulation of the four qubit states at the operating point.
  const double mu = cfg.photon.mu_q;
  const TimeBinLayout layout{cfg.readout.splitting, cfg.readout.width, cfg.photon.bin_width};
  struct Setting {
    QubitState state;
    double analyzer;
  };
  const std::vector<Setting> settings{{QubitState::e, 0.0},           {QubitState::l, 0.0},
                                      {QubitState::e_plus_l, 0.0},    {QubitState::e_plus_l, pi},
                                      {QubitState::e_plus_il, 0.5 * pi}, {QubitState::e_plus_il, 1.5 * pi}};
  std::vector<std::vector<double>> count_rows;
  std::vector<std::array<double, 4>> gates;
  for (std::size_t k = 0; k < settings.size(); ++k) {
    const QubitRun run{settings[k].state, mu, eta, noise, cfg.photon.n_trials, settings[k].analyzer};
    const auto h = simulate_counts(qubit_bin_model(run, layout), run.n_trials, counter_hash(seed, 0xb0, k));
    std::array<double, 4> g{};
    const char* names[] = {"early", "central", "late", "noise"};
    for (int i = 0; i < 4; ++i) g[i] = static_cast<double>(h.counts_in(h.window(names[i])));
    gates.push_back(g);
    count_rows.push_back({static_cast<double>(k), settings[k].analyzer, g[0], g[1], g[2], g[3]});
  }
  json simulated = nullptr;
  try {
    const double f_e = gates[0][0] / (gates[0][0] + gates[0][1]);
    const double f_l = gates[1][1] / (gates[1][1] + gates[1][0]);
    const double f_p = visibility_fidelity(std::max(gates[2][1], gates[3][1]), std::min(gates[2][1], gates[3][1]));
    const double f_pi = visibility_fidelity(std::max(gates[4][1], gates[5][1]), std::min(gates[4][1], gates[5][1]));
    simulated = {{"f_e", f_e}, {"f_l", f_l}, {"f_plus", f_p}, {"f_plus_i", f_pi},
                 {"total", total_fidelity(f_e, f_l, f_p, f_pi)}};
  } catch (const ConfigError&) {
    simulated = nullptr;
  }

  Output out(o, "bounds");
  out.csv("bounds.csv", {"mu_q", "classical_bound", "expected_fidelity"}, rows);
  out.csv("qubit_counts.csv", {"setting", "analyzer_phase_rad", "early", "central", "late", "noise"}, count_rows);
  json report = {{"eta", eta},
                 {"noise_per_window", noise},
                 {"crossover", crossover},
                 {"operating_point",
                  {{"mu_q", mu},
                   {"classical_bound", classical_bound(mu, eta)},
                   {"expected_fidelity", expected_fidelity(mu, eta, noise)},
                   {"snr_expected", noise > 0.0 ? json(mu * eta / noise) : json("inf")}}},
                 {"simulated_fidelity", simulated}};
  out.json_file("bounds_report.json", report);
  out.manifest(cfg.hash, cfg.source, seed, parameters(o));
}

void cmd_init_profile(const CliOptions& o) {
  const RunConfig cfg = load(o);
  const Timeline init = build_initialization(cfg.scheme, cfg.init_reps, cfg.init_pumps);
  const AbsorptionProfile profile = run_initialization_rate_equations(cfg.scheme, cfg.system, init, cfg.init_model);
  const FeatureMetrics feature = measure_feature(profile);

  Output out(o, "init-profile");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < profile.detunings.size(); ++i) rows.push_back({profile.detunings[i], profile.alpha[i]});
  out.csv("absorption_profile.csv", {"detuning_hz", "alpha"}, rows);
  std::vector<std::vector<double>> pops;
  for (std::size_t c = 0; c < profile.class_offsets.size(); ++c) {
    std::vector<double> row{profile.class_offsets[c]};
    for (int g = 0; g < 6; ++g) row.push_back(profile.populations(static_cast<Eigen::Index>(c), g));
    pops.push_back(row);
  }
  out.csv("class_populations.csv", {"offset_hz", "g1", "g2", "g3", "g4", "g5", "g6"}, pops);
  out.json_file("timeline.json", to_json(init));
  out.json_file("init_report.json", feature_json(feature, profile));
  out.manifest(cfg.hash, cfg.source, std::nullopt, parameters(o));
}

} // namespace qmem::cli
