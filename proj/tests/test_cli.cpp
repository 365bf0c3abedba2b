#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qmem_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(QMEM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string data(const std::string& name) { return std::string(QMEM_DATA_DIR) + "/" + name; }

void expect_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path other = b / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
    ++files;
  }
  EXPECT_GT(files, 1u);
}

} // namespace

TEST(Cli, PulseReportAndManifest) {
  const fs::path out = scratch("pulse");
  ASSERT_EQ(run("pulse --preset rf_pi --points 41 --out " + out.string()), 0);
  const json report = read_json(out / "pulse_report.json");
  EXPECT_GT(report["worst_inversion"].get<double>(), 0.99);
  EXPECT_TRUE(fs::exists(out / "pulse_inversion.csv"));
  const json manifest = read_json(out / "manifest.json");
  EXPECT_EQ(manifest["command"], "pulse");
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(manifest.contains("seed"));
  EXPECT_TRUE(manifest["versions"].contains("eigen"));
  EXPECT_GE(manifest["outputs"].size(), 3u);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("pulse --preset nope --out " + scratch("bad1").string()), 2);
  EXPECT_EQ(run("pulse --config /nonexistent.json --out " + scratch("bad2").string()), 2);
  EXPECT_EQ(run("fit --model mims --data /nonexistent.csv --out " + scratch("bad3").string()), 2);
  EXPECT_EQ(run("memory --protocol bogus --seed 1 --out " + scratch("bad4").string()), 2);
  EXPECT_EQ(run("bounds --unknown-flag"), 2);

  const fs::path few = scratch("few.csv");
  {
    std::ofstream f(few);
    f << "t_s,value,sigma\n1,0.9,0.01\n2,0.8,0.01\n3,0.7,0.01\n";
  }
  EXPECT_EQ(run("fit --model mims --data " + few.string() + " --out " + scratch("bad5").string()), 2);
}

TEST(Cli, BoundsSinglePoint) {
  const fs::path out = scratch("bounds1");
  ASSERT_EQ(run("bounds --mu 0.5 --eta 1 --noise 0 --seed 3 --out " + out.string()), 0);
  std::ifstream in(out / "bounds.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2); // header and one point
  const json report = read_json(out / "bounds_report.json");
  EXPECT_EQ(read_json(out / "manifest.json")["seed"], 3);
  EXPECT_TRUE(report.is_object());
}

TEST(Cli, FitRecoversStorageDecay) {
  const fs::path out = scratch("fit");
  ASSERT_EQ(run("fit --model mims --power amplitude --data " + data("decay_27p6s_m1p70.csv") + " --out " + out.string()),
            0);
  const json r = read_json(out / "fit_report.json");
  EXPECT_NEAR(r["fit"]["t2_s"].get<double>() / 27.6, 1.0, 0.05);
  EXPECT_NEAR(r["fit"]["m"].get<double>(), 1.70, 0.1);
  EXPECT_TRUE(fs::exists(out / "fit_curve.csv"));
}

TEST(Cli, TailFitHonoursStartTime) {
  const fs::path out = scratch("tail");
  ASSERT_EQ(run("fit --model mims_tail --t-min 15 --data " + data("decay_tail_36p3s_m1p25.csv") + " --out " +
                out.string()),
            0);
  const json r = read_json(out / "fit_report.json");
  EXPECT_NEAR(r["fit"]["t2_s"].get<double>() / 36.3, 1.0, 0.05);
}

TEST(Cli, SeededRunsAreByteIdentical) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(run("bounds --seed 11 --out " + a.string()), 0);
  ASSERT_EQ(run("bounds --seed 11 --out " + b.string()), 0);
  expect_same_tree(a, b);

  const fs::path c = scratch("det_c"), d = scratch("det_d");
  ASSERT_EQ(run("memory --protocol nlpe --ions 40 --seed 5 --out " + c.string()), 0);
  ASSERT_EQ(run("memory --protocol nlpe --ions 40 --seed 5 --out " + d.string()), 0);
  expect_same_tree(c, d);
}

TEST(Cli, EmptyDdBlockReproducesPlainEcho) {
  const fs::path a = scratch("plain"), b = scratch("dd0");
  ASSERT_EQ(run("memory --protocol nlpe --ions 40 --seed 5 --out " + a.string()), 0);
  ASSERT_EQ(run("memory --protocol nlpe_dd --n-pulses 0 --ions 40 --seed 5 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "echo.csv"), slurp(b / "echo.csv"));
  const json t = read_json(b / "timeline.json");
  EXPECT_TRUE(t.contains("events"));
}

TEST(Cli, InitProfileWritesTimeline) {
  const fs::path out = scratch("init");
  ASSERT_EQ(run("init-profile --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "absorption_profile.csv"));
  const json r = read_json(out / "init_report.json");
  EXPECT_TRUE(r.is_object());
  EXPECT_EQ(read_json(out / "timeline.json")["events"].size(), 1580u);
}
