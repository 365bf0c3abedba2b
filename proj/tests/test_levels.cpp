#include <gtest/gtest.h>

#include "qmem/config.hpp"
#include "qmem/levels.hpp"

using namespace qmem;

namespace {

LevelScheme shipped() { return load_run_config(default_config_path()).scheme; }

} // namespace

TEST(Levels, ShippedBranchingTableValues) {
  const LevelScheme s = shipped();
  const double table[6][6] = {{0.57, 0.18, 0.12, 0.10, 0.01, 0.02}, {0.32, 0.54, 0.01, 0.06, 0.00, 0.07},
                              {0.06, 0.18, 0.44, 0.10, 0.01, 0.21}, {0.00, 0.10, 0.14, 0.42, 0.04, 0.30},
                              {0.04, 0.00, 0.23, 0.27, 0.08, 0.38}, {0.01, 0.00, 0.06, 0.05, 0.86, 0.02}};
  for (int g = 1; g <= 6; ++g)
    for (int e = 1; e <= 6; ++e) EXPECT_DOUBLE_EQ(s.ratio(g, e), table[g - 1][e - 1]) << g << "," << e;
}

TEST(Levels, RowsAndColumnsSumToOneWithinTolerance) {
  const LevelScheme s = shipped();
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(s.branching.row(i).sum(), 1.0, branching_sum_tolerance);
    EXPECT_NEAR(s.branching.col(i).sum(), 1.0, branching_sum_tolerance);
  }
}

TEST(Levels, ValidateRejectsBrokenTables) {
  LevelScheme s = shipped();
  s.branching(0, 0) = -0.01;
  EXPECT_THROW(validate(s), ConfigError);

  s = shipped();
  s.branching(2, 2) += 0.1;
  EXPECT_THROW(validate(s), ConfigError);

  s = shipped();
  s.ground_energies[3] = s.ground_energies[2];
  EXPECT_THROW(validate(s), ConfigError);
}

TEST(Levels, TransitionFrequencyIsOriginPlusSplittings) {
  LevelScheme s = shipped();
  s.optical_origin = 5.0e14;
  for (int g = 1; g <= 6; ++g)
    for (int e = 1; e <= 6; ++e)
      EXPECT_DOUBLE_EQ(transition_frequency(s, g, e),
                       s.optical_origin + s.excited_energies[e - 1] - s.ground_energies[g - 1]);
}

TEST(Levels, NlpeSelectionUsesStrongestStorageLine) {
  const LevelScheme s = shipped();
  const FourLevelSystem sys = select_nlpe_levels(s, {3, 4});
  // strongest line out of g3 is e3 (0.44); e2 is strong from g3 and weak from g4
  EXPECT_EQ(sys.signal_excited, 3);
  EXPECT_EQ(sys.auxiliary_excited, 2);
  EXPECT_DOUBLE_EQ(sys.spin_frequency, s.ground_energies[3] - s.ground_energies[2]);
  EXPECT_DOUBLE_EQ(sys.signal_frequency, transition_frequency(s, 3, 3));
  EXPECT_THROW(select_nlpe_levels(s, {3, 3}), ConfigError);
  EXPECT_THROW(select_nlpe_levels(s, {0, 4}), ConfigError);
}

TEST(Levels, JsonRoundTrip) {
  const LevelScheme s = shipped();
  const LevelScheme back = load_level_scheme(to_json(s));
  EXPECT_EQ(back.ground_energies, s.ground_energies);
  EXPECT_EQ(back.excited_energies, s.excited_energies);
  EXPECT_TRUE(back.branching == s.branching);
}

TEST(Config, MalformedConfigsAreConfigErrors) {
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
  nlohmann::json doc = load_run_config(default_config_path()).document;
  doc["pulses"].erase("rf_pi");
  EXPECT_THROW(parse_run_config(doc), ConfigError);
  doc = load_run_config(default_config_path()).document;
  doc["nlpe_timings_s"] = {0.0, 1e-6};
  EXPECT_THROW(parse_run_config(doc), ConfigError);
}

TEST(Config, HashTracksContent) {
  const RunConfig a = load_run_config(default_config_path());
  nlohmann::json doc = a.document;
  EXPECT_EQ(config_hash(doc), a.hash);
  doc["seed"] = 7;
  EXPECT_NE(config_hash(doc), a.hash);
  EXPECT_EQ(a.hash.size(), 16u);
}
