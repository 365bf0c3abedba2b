#pragma once

#include <array>
#include <utility>

#include <Eigen/Core>
#include <json.hpp>

namespace qmem {

enum class Manifold { ground, excited };

// One hyperfine level, indexed 1..6 bottom-up within its manifold.
struct Level {
  Manifold manifold = Manifold::ground;
  int index = 1;

  friend bool operator==(const Level&, const Level&) = default;
};

inline Level ground(int i) { return {Manifold::ground, i}; }
inline Level excited(int i) { return {Manifold::excited, i}; }

using BranchingTable = Eigen::Matrix<double, 6, 6>;

// Row = ground level, column = excited level.
struct LevelScheme {
  std::array<double, 6> ground_energies{};  // Hz, relative to ground 1
  std::array<double, 6> excited_energies{}; // Hz, relative to excited 1
  double optical_origin = 0.0;              // Hz, ground 1 <-> excited 1
  BranchingTable branching = BranchingTable::Zero();

  double ratio(int g, int e) const { return branching(g - 1, e - 1); }
};

inline constexpr double branching_sum_tolerance = 0.02;

// Throws ConfigError on any violated invariant.
void validate(const LevelScheme& scheme);

LevelScheme load_level_scheme(const nlohmann::json& doc);
nlohmann::json to_json(const LevelScheme& scheme);

double transition_frequency(const LevelScheme& scheme, int g, int e);

struct FourLevelSystem {
  std::pair<int, int> ground_pair{3, 4}; // (storage ground, spin partner)
  int signal_excited = 3;
  int auxiliary_excited = 2;
  double spin_frequency = 0.0;              // Hz
  double signal_frequency = 0.0;            // Hz
  std::array<double, 2> control_frequencies{}; // spin partner <-> signal, storage <-> auxiliary
};

FourLevelSystem select_nlpe_levels(const LevelScheme& scheme, std::pair<int, int> zefoz_pair);

} // namespace qmem
