#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "gridfuse/io.hpp"

using namespace gridfuse;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gridfuse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gridfuse_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}), 1);
  EXPECT_EQ(cli({"teleport"}), 1);
  EXPECT_EQ(cli({"filter", "--observations", "x.csv"}), 1);
  EXPECT_EQ(cli({"demo", "--combine", "max"}), 1);
  EXPECT_EQ(cli({"calibrate", "--residuals", "r.csv", "--components", "0"}), 1);
  EXPECT_EQ(cli({"--help"}), 0);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(cli({"evaluate", "--estimates", path("none.csv"), "--truth", path("none.csv")}), 2);
  write("bad.json", "{\"schema\": \"gridfuse.scenario/1\", \"kind\": 5}");
  EXPECT_EQ(cli({"simulate", "--config", path("bad.json"), "--out", path("sim")}), 2);
  write("r.csv", "residual\n1.0\nfoo\n");
  EXPECT_EQ(cli({"calibrate", "--residuals", path("r.csv"), "--out", dir_.string()}), 2);
}

TEST_F(CliTest, EvaluateOfPerfectEstimatesIsZero) {
  write("truth.csv", "t,x,y,z\n0,1,2,3\n1,1.5,2,3\n2,2,2,3\n");
  write("est.csv",
        "t,x,y,z,map_index,map_mass,radius,support\n0,1,2,3,0,1,1,1\n1,1.5,2,3,0,1,1,1\n2,2,2,3,0,1,1,1\n");
  ASSERT_EQ(cli({"evaluate", "--estimates", path("est.csv"), "--truth", path("truth.csv"), "--label", "zero",
                 "--out", dir_.string()}),
            0);
  EXPECT_EQ(slurp(dir_ / "stats.csv"),
            "label,count,mean,median,variance,q68_27,q95_45,q99_73,p25,p50,p75\nzero,3,0,0,0,0,0,0,0,0,0\n");
  EXPECT_EQ(slurp(dir_ / "ecdf.csv"), "error,cdf\n0,1\n");
}

TEST_F(CliTest, SimulateFilterEvaluateCalibrate) {
  write("scenario.json",
        R"({"schema": "gridfuse.scenario/1", "kind": "static", "seed": 9,
            "static": {"epochs": 30, "cell_size": 0.5}})");
  ASSERT_EQ(cli({"simulate", "--config", path("scenario.json"), "--out", path("sim")}), 0);
  for (const char* f : {"scenario.json", "observations.csv", "truth.csv", "filter.json", "residuals.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sim" / f)) << f;
  }
  ASSERT_EQ(cli({"filter", "--config", path("sim/filter.json"), "--observations", path("sim/observations.csv"),
                 "--out", path("run"), "--radius", "1.0"}),
            0);
  ASSERT_EQ(cli({"evaluate", "--estimates", path("run/estimates.csv"), "--truth", path("sim/truth.csv"), "--out",
                 path("run")}),
            0);
  std::ifstream est(dir_ / "run" / "estimates.csv");
  const auto estimates = read_estimates(est);
  EXPECT_EQ(estimates.size(), 30u);
  for (const auto& e : estimates) EXPECT_EQ(e.radius, 1.0);
  ASSERT_EQ(cli({"calibrate", "--residuals", path("sim/residuals.csv"), "--components", "2", "--out",
                 path("cal")}),
            0);
  std::ifstream gmm(dir_ / "cal" / "gmm.csv");
  EXPECT_EQ(read_gmm(gmm).components.size(), 2u);
}

TEST_F(CliTest, SimulateIsReproducible) {
  ASSERT_EQ(cli({"simulate", "--kind", "dynamic", "--seed", "5", "--out", path("a")}), 0);
  ASSERT_EQ(cli({"simulate", "--kind", "dynamic", "--seed", "5", "--out", path("b")}), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "observations.csv"), slurp(dir_ / "b" / "observations.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "truth.csv"), slurp(dir_ / "b" / "truth.csv"));
}
