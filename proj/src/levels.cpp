#include "qmem/levels.hpp"

#include <cmath>
#include <string>

#include "qmem/types.hpp"

namespace qmem {

namespace {

void check_index(int i, const char* what) {
  if (i < 1 || i > 6) throw ConfigError(std::string(what) + " index out of range: " + std::to_string(i));
}

template <typename Array>
void check_increasing(const Array& e, const char* what) {
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!std::isfinite(e[i])) throw ConfigError(std::string(what) + " energies must be finite");
    if (i > 0 && !(e[i] > e[i - 1]))
      throw ConfigError(std::string(what) + " energies must be strictly increasing");
  }
}

template <typename Array>
Array read_six(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_array() || doc.at(key).size() != 6)
    throw ConfigError(std::string("expected 6 values for ") + key);
  Array out{};
  for (std::size_t i = 0; i < 6; ++i) {
    if (!doc.at(key)[i].is_number()) throw ConfigError(std::string("non-numeric entry in ") + key);
    out[i] = doc.at(key)[i].get<double>();
  }
  return out;
}

} // namespace

void validate(const LevelScheme& scheme) {
  check_increasing(scheme.ground_energies, "ground");
  check_increasing(scheme.excited_energies, "excited");
  const auto& r = scheme.branching;
  if (!r.allFinite()) throw ConfigError("branching ratios must be finite");
  if (r.minCoeff() < 0.0) throw ConfigError("negative branching ratio");
  if (r.maxCoeff() > 1.0) throw ConfigError("branching ratio above 1");
  for (int i = 0; i < 6; ++i) {
    if (std::abs(r.row(i).sum() - 1.0) > branching_sum_tolerance)
      throw ConfigError("branching row " + std::to_string(i + 1) + " sums to " + std::to_string(r.row(i).sum()));
    if (std::abs(r.col(i).sum() - 1.0) > branching_sum_tolerance)
      throw ConfigError("branching column " + std::to_string(i + 1) + " sums to " + std::to_string(r.col(i).sum()));
  }
}

LevelScheme load_level_scheme(const nlohmann::json& doc) {
  LevelScheme s;
  s.ground_energies = read_six<std::array<double, 6>>(doc, "ground_energies_hz");
  s.excited_energies = read_six<std::array<double, 6>>(doc, "excited_energies_hz");
  s.optical_origin = doc.value("optical_origin_hz", 0.0);
  if (!doc.contains("branching") || !doc.at("branching").is_array() || doc.at("branching").size() != 6)
    throw ConfigError("branching must be a 6x6 table");
  for (int i = 0; i < 6; ++i) {
    const auto& row = doc.at("branching")[i];
    if (!row.is_array() || row.size() != 6) throw ConfigError("branching must be a 6x6 table");
    for (int j = 0; j < 6; ++j) {
      if (!row[j].is_number()) throw ConfigError("non-numeric branching ratio");
      s.branching(i, j) = row[j].get<double>();
    }
  }
  validate(s);
  return s;
}

nlohmann::json to_json(const LevelScheme& scheme) {
  nlohmann::json table = nlohmann::json::array();
  for (int i = 0; i < 6; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 6; ++j) row.push_back(scheme.branching(i, j));
    table.push_back(row);
  }
  return {{"ground_energies_hz", scheme.ground_energies},
          {"excited_energies_hz", scheme.excited_energies},
          {"optical_origin_hz", scheme.optical_origin},
          {"branching", table}};
}

double transition_frequency(const LevelScheme& scheme, int g, int e) {
  check_index(g, "ground");
  check_index(e, "excited");
  return scheme.optical_origin + scheme.excited_energies[e - 1] - scheme.ground_energies[g - 1];
}

FourLevelSystem select_nlpe_levels(const LevelScheme& scheme, std::pair<int, int> zefoz_pair) {
  const auto [low, high] = zefoz_pair;
  check_index(low, "ground");
  check_index(high, "ground");
  if (low == high) throw ConfigError("ground pair levels must be distinct");

  // strict > keeps the lowest index on ties
  int signal = 0;
  double best = 0.0;
  for (int e = 1; e <= 6; ++e) {
    if (scheme.ratio(low, e) > best) {
      best = scheme.ratio(low, e);
      signal = e;
    }
  }
  if (signal == 0) throw ConfigError("storage level has no optical transitions");

  int aux = 0;
  double best_score = 0.0;
  for (int e = 1; e <= 6; ++e) {
    if (e == signal) continue;
    const double score = scheme.ratio(low, e) * (1.0 - scheme.ratio(high, e));
    if (score > best_score) {
      best_score = score;
      aux = e;
    }
  }
  if (aux == 0) throw ConfigError("no auxiliary excited level with a nonzero score");

  FourLevelSystem sys;
  sys.ground_pair = zefoz_pair;
  sys.signal_excited = signal;
  sys.auxiliary_excited = aux;
  sys.spin_frequency = scheme.ground_energies[high - 1] - scheme.ground_energies[low - 1];
  sys.signal_frequency = transition_frequency(scheme, low, signal);
  sys.control_frequencies = {transition_frequency(scheme, high, signal), transition_frequency(scheme, low, aux)};
  return sys;
}

} // namespace qmem
