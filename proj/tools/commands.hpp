#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace qmem::cli {

struct CliOptions {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> ions;
  std::optional<double> tau;
  std::optional<int> n_pulses;
  std::optional<double> delta;
  std::optional<double> mu;
  std::optional<double> eta;
  std::optional<double> noise;

  // pulse
  std::string preset = "pi43";
  int points = 101;
  double amplitude_error = 0.1;

  // memory
  std::string protocol = "nlpe";

  // fit
  std::string model = "mims";
  std::string data;
  std::string power = "amplitude";
  double t_min = 15.0;
  std::optional<double> measured_eta;
};

void cmd_pulse(const CliOptions& o);
void cmd_memory(const CliOptions& o);
void cmd_fit(const CliOptions& o);
void cmd_bounds(const CliOptions& o);
void cmd_init_profile(const CliOptions& o);

} // namespace qmem::cli
