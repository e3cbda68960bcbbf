#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mghc/sweep.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("mghc_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

int run_cli(const std::string& args, const std::string& tag = "run") {
  const std::string cmd = std::string(MGHC_CLI_PATH) + " " + args + " > " +
                          (scratch() / (tag + ".out")).string() + " 2> " +
                          (scratch() / (tag + ".err")).string();
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST(Cli, SimulateExitCodeFollowsVerdict) {
  const std::pair<const char*, const char*> corners[] = {
      {"LOW", "OFF"}, {"LOW", "ON"}, {"HIGH", "OFF"}, {"HIGH", "ON"}};
  int stable = 0;
  int unstable = 0;
  for (const auto& [load, diesel] : corners) {
    for (const char* pv : {"0", "0.7"}) {
      const std::string tag = std::string(load) + diesel + pv;
      const auto cfg = write_config(tag + ".ini", std::string("load = ") + load + "\ndiesel = " +
                                                      diesel + "\npv_fraction = " + pv + "\n");
      const fs::path out = scratch() / tag;
      const int code = run_cli("simulate --config " + cfg.string() + " --out " + out.string(), tag);
      const std::string verdict = first_line(read(out / "verdict.txt"));
      if (verdict == "verdict: Stable") {
        EXPECT_EQ(code, 0) << tag;
        ++stable;
      } else {
        EXPECT_EQ(verdict, "verdict: Unstable") << tag;
        EXPECT_EQ(code, 2) << tag;
        ++unstable;
      }
      EXPECT_TRUE(fs::exists(out / "timeseries.csv"));
    }
  }
  EXPECT_GT(stable, 0);
  EXPECT_GT(unstable, 0);
}

TEST(Cli, VerdictFileCarriesConfiguration) {
  const auto cfg = write_config("vf.ini", "load = LOW\ndiesel = ON\npv_fraction = 0.1\n");
  const fs::path out = scratch() / "vf";
  run_cli("simulate --plot --config " + cfg.string() + " --out " + out.string(), "vf");
  const std::string v = read(out / "verdict.txt");
  EXPECT_NE(v.find("r_speed:"), std::string::npos);
  EXPECT_NE(v.find("# parameter_set: fnv1a64:"), std::string::npos);
  EXPECT_NE(v.find("pv_fraction = 0.1"), std::string::npos);
  EXPECT_NE(read(out / "timeseries.csv").find("# verdict: "), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "run.svg"));
}

TEST(Cli, IslandingAfterEndIsAnError) {
  const auto cfg = write_config("late.ini", "[engine]\nt_end_s = 3\nislanding_time_s = 3\n");
  EXPECT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + (scratch() / "late").string(), "late"), 1);
  EXPECT_NE(read(scratch() / "late.err").find("islanding_time_s"), std::string::npos);
}

TEST(Cli, BadConfigNamesLine) {
  const auto cfg = write_config("bad.ini", "load = LOW\ndieselx = ON\n");
  EXPECT_EQ(run_cli("simulate --config " + cfg.string(), "bad"), 1);
  const std::string err = read(scratch() / "bad.err");
  EXPECT_NE(err.find("line 2"), std::string::npos);
  EXPECT_NE(err.find("dieselx"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("", "u1"), 1);
  EXPECT_EQ(run_cli("simulate", "u2"), 1);
  EXPECT_EQ(run_cli("frobnicate", "u3"), 1);
  EXPECT_EQ(run_cli("--help", "u4"), 0);
}

TEST(Cli, SweepExpandsEllipsis) {
  const auto cfg = write_config("sw.ini", "[engine]\nt_end_s = 5.5\ndt_s = 0.002\n");
  const fs::path out = scratch() / "sw";
  EXPECT_EQ(run_cli("sweep --config " + cfg.string() + " --out " + out.string() +
                     " --scenarios low_on --fractions 0,0.05,...,0.6",
                 "sw"),
            0);
  const auto grid = mghc::parse_report_csv(read(out / "hosting_report.csv"));
  EXPECT_EQ(grid.scenario_ids, std::vector<std::string>{"low_on"});
  ASSERT_EQ(grid.fractions.size(), 13u);
  EXPECT_DOUBLE_EQ(grid.fractions[1], 0.05);
  EXPECT_DOUBLE_EQ(grid.fractions[12], 0.6);
  const std::string text = read(out / "hosting_report.txt");
  EXPECT_NE(text.find("60%"), std::string::npos);
  EXPECT_NE(text.find("# resolved configuration"), std::string::npos);
  EXPECT_EQ(read(scratch() / "sw.out").find("# resolved configuration"), std::string::npos);
}

TEST(Cli, PlotReportsMalformedRow) {
  std::ofstream(scratch() / "broken.csv") << "t,gen_p_mw\n0,1\n0.1\n";
  EXPECT_EQ(run_cli("plot " + (scratch() / "broken.csv").string() + " " + (scratch() / "b.svg").string(), "pb"),
            1);
  EXPECT_NE(read(scratch() / "pb.err").find("row 2"), std::string::npos);
}

TEST(Cli, PlotRoundTripsSimulateOutput) {
  const auto cfg = write_config("pl.ini", "diesel = OFF\npv_fraction = 0.2\n[engine]\nt_end_s = 6\n");
  const fs::path out = scratch() / "pl";
  run_cli("simulate --plot --config " + cfg.string() + " --out " + out.string(), "pl");
  const fs::path svg = scratch() / "pl_again.svg";
  EXPECT_EQ(run_cli("plot " + (out / "timeseries.csv").string() + " " + svg.string(), "pl2"), 0);
  EXPECT_EQ(read(svg), read(out / "run.svg"));
}

TEST(Cli, RefusesToOverwriteInput) {
  std::ofstream(scratch() / "keep.csv") << "t,a\n0,1\n";
  const auto p = (scratch() / "keep.csv").string();
  EXPECT_EQ(run_cli("plot " + p + " " + p, "ow"), 1);
  EXPECT_EQ(read(scratch() / "keep.csv"), "t,a\n0,1\n");
}

TEST(Cli, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(MGHC_CONFIG_DIR)) {
    if (e.path().extension() != ".ini") continue;
    const fs::path out = scratch() / ("cfg_" + e.path().stem().string());
    const int code = run_cli("sweep --config " + e.path().string() + " --out " + out.string() +
                              " --scenarios low_on --fractions 0",
                          "cfg");
    EXPECT_EQ(code, 0) << e.path() << ": " << read(scratch() / "cfg.err");
  }
}
