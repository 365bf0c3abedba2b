#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "qmem/types.hpp"

namespace {

void add_common(CLI::App* sub, qmem::cli::CliOptions& o) {
  sub->add_option("--config", o.config, "run configuration (JSON)");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option_function<std::uint64_t>("--seed", [&o](const std::uint64_t& v) { o.seed = v; }, "random seed");
  sub->add_option_function<int>("--ions", [&o](const int& v) { o.ions = v; }, "ensemble size");
  sub->add_option_function<double>("--tau", [&o](const double& v) { o.tau = v; }, "DD pulse spacing, s");
  sub->add_option_function<int>("--n-pulses", [&o](const int& v) { o.n_pulses = v; }, "DD pulse count");
  sub->add_option_function<double>("--delta", [&o](const double& v) { o.delta = v; }, "UR4 phase offset, rad");
  sub->add_option_function<double>("--mu", [&o](const double& v) { o.mu = v; }, "mean photon number");
  sub->add_option_function<double>("--eta", [&o](const double& v) { o.eta = v; }, "memory efficiency");
}

} // namespace

int main(int argc, char** argv) {
  qmem::cli::CliOptions o;
  CLI::App app{"Rare-earth quantum memory simulator"};
  app.require_subcommand(1);

  auto* pulse = app.add_subcommand("pulse", "inversion of a pulse preset versus detuning and amplitude");
  add_common(pulse, o);
  pulse->add_option("--preset", o.preset, "pulse preset name");
  pulse->add_option("--points", o.points, "detuning samples");
  pulse->add_option("--amplitude-error", o.amplitude_error, "relative amplitude excursion");

  auto* memory = app.add_subcommand("memory", "storage protocol simulation and echo analysis");
  add_common(memory, o);
  memory->add_option("--protocol", o.protocol, "nlpe or nlpe_dd");

  auto* fit = app.add_subcommand("fit", "decay and surface fits");
  add_common(fit, o);
  fit->add_option("--model", o.model, "mims, mims_tail or nlpe_surface");
  fit->add_option("--data", o.data, "CSV data file");
  fit->add_option("--power", o.power, "amplitude or intensity");
  fit->add_option("--t-min", o.t_min, "tail fit start, s");
  fit->add_option_function<double>("--measured-eta", [&o](const double& v) { o.measured_eta = v; },
                                   "efficiency at the shortest delays");

  auto* bounds = app.add_subcommand("bounds", "classical fidelity bound and expected memory fidelity");
  add_common(bounds, o);
  bounds->add_option_function<double>("--noise", [&o](const double& v) { o.noise = v; },
                                      "noise counts per detection window");

  auto* init = app.add_subcommand("init-profile", "absorption profile after spectral initialization");
  add_common(init, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (pulse->parsed()) qmem::cli::cmd_pulse(o);
    else if (memory->parsed()) qmem::cli::cmd_memory(o);
    else if (fit->parsed()) qmem::cli::cmd_fit(o);
    else if (bounds->parsed()) qmem::cli::cmd_bounds(o);
    else if (init->parsed()) qmem::cli::cmd_init_profile(o);
  } catch (const qmem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qmem::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
