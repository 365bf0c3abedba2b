// Writes the synthetic fit datasets shipped in data/.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "qmem/models.hpp"

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_decay(const std::string& path, const std::string& note, const std::vector<qmem::DataPoint>& pts) {
  std::ofstream f(path);
  f << "# " << note << "\n" << "t_s,value,sigma\n";
  for (const auto& p : pts) f << number(p.t) << "," << number(p.value) << "," << number(p.sigma) << "\n";
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
  return v;
}

} // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data";
  using qmem::ModelPower;

  write_decay(dir + "/decay_18p7s_m1p05.csv", "synthetic: T2 = 18.7 s, m = 1.05, amplitude law, 1% noise, seed 11",
              qmem::synthetic_mims(18.7, 1.05, ModelPower::amplitude, linspace(1.0, 60.0, 30), 1.0, 0.01, 11));
  write_decay(dir + "/decay_33p1s_m1p25.csv", "synthetic: T2 = 33.1 s, m = 1.25, amplitude law, 1% noise, seed 12",
              qmem::synthetic_mims(33.1, 1.25, ModelPower::amplitude, linspace(1.0, 90.0, 30), 1.0, 0.01, 12));
  write_decay(dir + "/decay_27p6s_m1p70.csv", "synthetic: T2 = 27.6 s, m = 1.70, amplitude law, 2% noise, seed 13",
              qmem::synthetic_mims(27.6, 1.70, ModelPower::amplitude, linspace(1.0, 60.0, 30), 1.0, 0.02, 13));

  // Heating suppresses the short-delay points by 0.7; the tail beyond 15 s follows the intensity law.
  auto tail = qmem::synthetic_mims(36.3, 1.25, ModelPower::intensity, linspace(1.0, 80.0, 40), 1.0, 0.01, 14);
  for (auto& p : tail)
    if (p.t < 10.0) {
      p.value *= 0.7;
      p.sigma *= 0.7;
    }
  write_decay(dir + "/decay_tail_36p3s_m1p25.csv",
              "synthetic: T2 = 36.3 s, m = 1.25, intensity law, x0.7 below 10 s, 1% noise, seed 14", tail);

  qmem::NlpeFit truth;
  truth.gamma34 = 7.7e3;
  truth.gamma23bar = 8.4e3;
  truth.gamma_opt = 5.9e3;
  truth.eta_control = 0.82;
  const auto surface = qmem::synthetic_surface(truth, 1.0, linspace(5e-6, 100e-6, 24), linspace(5e-6, 80e-6, 24),
                                               0.02, 15);
  std::ofstream f(dir + "/nlpe_surface.csv");
  f << "# synthetic: Gamma34 = 7.7 kHz, Gamma23 = 8.4 kHz, gamma = 5.9e3 1/s, eta_c = 0.82, d = 1, 2% noise, "
       "seed 15\n"
    << "t31_s,t42_s,value,sigma\n";
  for (const auto& p : surface)
    f << number(p.t31) << "," << number(p.t42) << "," << number(p.value) << "," << number(p.sigma) << "\n";
  std::cout << "wrote datasets to " << dir << "\n";
  return 0;
}
