#include "qmem/config.hpp"

#include <cstdio>
#include <fstream>

namespace qmem {

namespace {

template <class T>
T get(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

const nlohmann::json& section(const nlohmann::json& doc, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!doc.contains(key)) return empty;
  if (!doc.at(key).is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return doc.at(key);
}

} // namespace

const PulseSpec& RunConfig::preset(const std::string& name) const {
  const auto it = presets.find(name);
  if (it == presets.end()) throw ConfigError("unknown pulse preset: " + name);
  return it->second;
}

std::string default_config_path() { return std::string(QMEM_CONFIG_DIR) + "/default.json"; }

std::string config_hash(const nlohmann::json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  return parse_run_config(doc, path);
}

RunConfig parse_run_config(const nlohmann::json& doc, const std::string& source) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  RunConfig c;
  c.document = doc;
  c.source = source;
  c.hash = config_hash(doc);

  try {
    c.scheme = load_level_scheme(doc.at("levels"));
    const auto pair = get<std::vector<int>>(doc, "zefoz_pair", {3, 4});
    if (pair.size() != 2) throw ConfigError("zefoz_pair needs two indices");
    c.system = select_nlpe_levels(c.scheme, {pair[0], pair[1]});

    for (const auto& [name, spec] : section(doc, "pulses").items()) c.presets.emplace(name, pulse_from_json(name, spec));
    for (const char* required : {"pi43", "pi32", "rf_pi"}) c.preset(required);
    c.signal = pulse_from_json("signal", doc.at("signal"));

    const auto& ens = section(doc, "ensemble");
    c.ensemble.n_ions = get(ens, "n_ions", c.ensemble.n_ions);
    c.ensemble.optical_fwhm = get(ens, "optical_fwhm_hz", 0.0);
    c.ensemble.spin_fwhm = get(ens, "spin_fwhm_hz", 0.0);
    c.ensemble.ee_fwhm = get(ens, "ee_fwhm_hz", 0.0);
    c.ensemble.spin_phase_classes = get(ens, "spin_phase_classes", 1);

    const auto& dec = section(doc, "decoherence");
    c.decoherence.optical_dephasing_rate = get(dec, "optical_dephasing_rate_per_s", 0.0);
    c.decoherence.spin_dephasing_rate = get(dec, "spin_dephasing_rate_per_s", 0.0);
    if (dec.contains("excited_lifetime_s")) c.decoherence.excited_lifetime = get(dec, "excited_lifetime_s", 0.0);
    validate(c.decoherence);

    const auto t = get<std::vector<double>>(doc, "nlpe_timings_s", {0.0, 4e-6, 10e-6, 18e-6, 24.1e-6});
    if (t.size() != 5) throw ConfigError("nlpe_timings_s needs five values");
    c.timings = {t[0], t[1], t[2], t[3], t[4]};

    const auto& dd = section(doc, "dd");
    c.dd.tau = get(dd, "tau_s", c.dd.tau);
    c.dd.n_pulses = get(dd, "n_pulses", c.dd.n_pulses);
    c.dd.delta = get(dd, "delta_rad", c.dd.delta);
    c.dd.amplitude_error = get(dd, "amplitude_error", c.dd.amplitude_error);

    const auto& ro = section(doc, "readout");
    c.readout.width = get(ro, "width_s", c.readout.width);
    c.readout.splitting = get(ro, "splitting_s", c.readout.splitting);
    c.readout.grid_step = get(ro, "grid_step_s", c.readout.grid_step);

    const auto& init = section(doc, "initialization");
    c.init_reps.class_cleaning = get(init, "class_cleaning_reps", c.init_reps.class_cleaning);
    c.init_reps.spin_polarization = get(init, "spin_polarization_reps", c.init_reps.spin_polarization);
    c.init_reps.back_burning = get(init, "back_burning_reps", c.init_reps.back_burning);
    c.init_pumps.clean_bandwidth = get(init, "clean_bandwidth_hz", c.init_pumps.clean_bandwidth);
    c.init_pumps.back_bandwidth = get(init, "back_bandwidth_hz", c.init_pumps.back_bandwidth);
    c.init_pumps.pulse_duration = get(init, "pulse_duration_s", c.init_pumps.pulse_duration);
    c.init_model.pump_strength = get(init, "pump_strength", c.init_model.pump_strength);
    c.init_model.class_step = get(init, "class_step_hz", c.init_model.class_step);
    c.init_model.line_width = get(init, "line_width_hz", c.init_model.line_width);
    c.init_model.profile_half_span = get(init, "profile_half_span_hz", c.init_model.profile_half_span);
    c.init_model.profile_step = get(init, "profile_step_hz", c.init_model.profile_step);
    validate(c.init_model);

    const auto& eff = section(doc, "efficiency");
    c.budget.d = get(eff, "d", c.budget.d);
    c.budget.eta_control = get(eff, "eta_control", c.budget.eta_control);
    c.budget.heating_penalty = get(eff, "heating_penalty", c.budget.heating_penalty);
    c.budget.gamma = c.decoherence.optical_dephasing_rate;
    c.budget.gamma34 = c.ensemble.spin_fwhm;
    c.budget.gamma23bar = c.ensemble.ee_fwhm;
    validate(c.budget);

    const auto& ph = section(doc, "photonstats");
    c.photon.mu_q = get(ph, "mu_q", c.photon.mu_q);
    c.photon.eta = get(ph, "eta", c.photon.eta);
    c.photon.reference_snr = get(ph, "reference_snr", c.photon.reference_snr);
    c.photon.reference_mu = get(ph, "reference_mu", c.photon.reference_mu);
    c.photon.n_trials = get(ph, "n_trials", c.photon.n_trials);
    c.photon.collection_efficiency = get(ph, "collection_efficiency", c.photon.collection_efficiency);
    c.photon.bin_width = get(ph, "bin_width_s", c.photon.bin_width);
    if (!(c.photon.reference_snr > 0.0)) throw ConfigError("reference SNR must be positive");

    const auto& b = section(doc, "bounds");
    c.bounds.mu_min = get(b, "mu_min", c.bounds.mu_min);
    c.bounds.mu_max = get(b, "mu_max", c.bounds.mu_max);
    c.bounds.points = get(b, "points", c.bounds.points);

    c.seed = get<std::uint64_t>(doc, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.ensemble.seed = c.seed;
  validate(c.ensemble);
  return c;
}

} // namespace qmem
