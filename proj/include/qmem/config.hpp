#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "qmem/dynamics.hpp"
#include "qmem/echo.hpp"
#include "qmem/levels.hpp"
#include "qmem/pulses.hpp"
#include "qmem/sequences.hpp"

namespace qmem {

struct DdSettings {
  double tau = 1.4;            // s
  int n_pulses = 4;
  double delta = 0.0;          // rad
  double amplitude_error = 0.0; // relative, applied to every RF pulse
};

struct ReadoutSettings {
  double width = default_readout_width; // s
  double splitting = 3e-6;              // s
  double grid_step = 50e-9;             // s
};

struct PhotonSettings {
  double mu_q = 1.16;
  double eta = 0.082;
  double reference_snr = 11.3; // fixes the noise floor together with reference_mu
  double reference_mu = 1.18;
  long long n_trials = 35000;
  double collection_efficiency = 0.01;
  double bin_width = 0.1e-6;   // s

  double noise_per_window() const { return reference_mu * eta / reference_snr; }
};

struct BoundsSettings {
  double mu_min = 0.05;
  double mu_max = 3.0;
  int points = 60;
};

struct RunConfig {
  nlohmann::json document;
  std::string source;
  std::string hash;

  LevelScheme scheme;
  FourLevelSystem system;
  std::map<std::string, PulseSpec> presets;
  PulseSpec signal;
  EnsembleSpec ensemble;
  DecoherenceSpec decoherence;
  NlpeTimings timings;
  DdSettings dd;
  ReadoutSettings readout;
  InitializationReps init_reps;
  InitializationPumps init_pumps;
  InitializationModel init_model;
  EfficiencyBudget budget;
  PhotonSettings photon;
  BoundsSettings bounds;
  std::uint64_t seed = 1;

  const PulseSpec& preset(const std::string& name) const;
};

std::string default_config_path();

// Throws ConfigError on unreadable files, malformed JSON or invalid values.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const nlohmann::json& doc, const std::string& source = "<inline>");

// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

} // namespace qmem
