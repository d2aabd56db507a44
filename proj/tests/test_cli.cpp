#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cifreg/json_io.hpp"

namespace fs = std::filesystem;
using cifreg::Json;

namespace {

struct CliResult {
  int code;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cifreg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  CliResult run(const std::string& args) const {
    const std::string cmd = std::string(CIFREG_CLI_PATH) + " " + args + " > " + path("stdout") + " 2> " + path("stderr");
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read("stdout")};
  }

  void simulate(const std::string& truth_json, const std::string& name, int n = 400) const {
    write("truth.json", truth_json);
    ASSERT_EQ(run("simulate --config " + path("truth.json") + " --n " + std::to_string(n) + " --seed 3 --out " +
                  path(name))
                  .code,
              0);
  }

  fs::path dir_;
};

constexpr const char* kIntensity =
    R"({"family": "intensity", "p_event": 0.6, "p1": 0.6, "exp_g1": 0.75, "exp_g2": 0.8})";

}  // namespace

TEST_F(Cli, SampleSize) {
  const auto r = run("samplesize --omega 0.05 --power 0.8 --beta1 -0.2231435513142097 --pobs 0.5");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1262\n");
  EXPECT_EQ(run("samplesize --omega 0.05 --power 0.8 --beta1 -0.2231435513142097 --pobs 1").out, "631\n");
  EXPECT_EQ(run("samplesize --omega 0.05 --power 0.8 --beta1 0 --pobs 0.5").code, 2);
}

TEST_F(Cli, Calibrate) {
  const auto r = run("calibrate --pT 0.6 --p1 0.6");
  ASSERT_EQ(r.code, 0);
  const auto j = Json::parse(r.out);
  EXPECT_NEAR(j["rate1"].get<double>() + j["rate2"].get<double>(), -std::log(0.4), 1e-10);
}

TEST_F(Cli, SimulateIsDeterministic) {
  simulate(kIntensity, "a.csv");
  const std::string first = read("a.csv");
  simulate(kIntensity, "a.csv");
  EXPECT_EQ(first, read("a.csv"));
  EXPECT_EQ(first.substr(0, first.find('\n')), "id,time,status,x");
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 401);
}

TEST_F(Cli, FitBothMethods) {
  simulate(kIntensity, "d.csv", 600);
  ASSERT_EQ(run("fit --method fg --data " + path("d.csv") + " --out " + path("fg.json")).code, 0);
  const auto fg = Json::parse(read("fg.json"));
  EXPECT_TRUE(fg.contains("beta_hat"));
  EXPECT_GT(fg["se_robust"].get<double>(), 0.0);
  ASSERT_EQ(run("fit --method db --data " + path("d.csv") + " --grid 0.2,0.4,0.6 --out " + path("db.json")).code, 0);
  const auto db = Json::parse(read("db.json"));
  EXPECT_EQ(db["grid"].size(), 3u);
  EXPECT_EQ(db["alpha_hat"].size(), 3u);
  EXPECT_EQ(db["cov"].size(), 4u);
  const auto boot = run("fit --method db --data " + path("d.csv") + " --R 3 --variance bootstrap --n-boot 20");
  ASSERT_EQ(boot.code, 0);
  EXPECT_EQ(Json::parse(boot.out)["n_boot"].get<int>(), 20);
}

TEST_F(Cli, TestBattery) {
  simulate(kIntensity, "d.csv", 600);
  const auto r = run("test --data " + path("d.csv") + " --tests all --n-boot 30");
  ASSERT_EQ(r.code, 0);
  const auto j = Json::parse(r.out);
  ASSERT_EQ(j.size(), 9u);
  for (const auto& t : j) {
    EXPECT_GE(t["p_value"].get<double>(), 0.0);
    EXPECT_LE(t["p_value"].get<double>(), 1.0);
  }
  const auto two = Json::parse(run("test --data " + path("d.csv") + " --tests T_LR_l1,T_Gray_F1").out);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_EQ(run("test --data " + path("d.csv") + " --tests T_nope").code, 2);
}

TEST_F(Cli, LimitsSweep) {
  write("sweep.json", R"({"exp_g1": [0.75, 1.0], "exp_g2": [1.0], "p1": [0.6]})");
  ASSERT_EQ(run("limits --config " + path("sweep.json") + " --out " + path("sweep.csv")).code, 0);
  const std::string s = read("sweep.csv");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  EXPECT_NE(s.find("-0.2813"), std::string::npos);
}

TEST_F(Cli, StudyTable) {
  write("study.json", R"({"exp_g1": [0.75], "exp_g2": [1.0], "n": 200, "n_sim": 50, "tests": ["T_LR_l1"]})");
  const auto a = run("study --config " + path("study.json") + " --reps 3 --threads 1");
  const auto b = run("study --config " + path("study.json") + " --reps 3 --threads 2");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 2);
  const auto md = run("study --config " + path("study.json") + " --reps 2 --format markdown");
  EXPECT_EQ(md.out.substr(0, 10), "| exp_g2 |");
}

TEST_F(Cli, ErrorExitCodes) {
  write("bad.json", R"({"family": "intensity", "p_event": 1.5})");
  EXPECT_EQ(run("simulate --config " + path("bad.json") + " --n 10").code, 2);
  write("typo.json", R"({"n_simm": 3})");
  EXPECT_EQ(run("study --config " + path("typo.json")).code, 2);
  write("broken.json", "{");
  EXPECT_EQ(run("limits --config " + path("broken.json")).code, 2);
  EXPECT_EQ(run("fit --method fg --data " + path("missing.csv")).code, 2);
  EXPECT_EQ(run("fit --method xx --data x").code, 2);
  EXPECT_EQ(run("").code, 2);
  write("onearm.csv", "id,time,status,x\n1,0.2,1,0\n2,0.3,1,0\n3,0.5,2,1\n4,1,0,1\n");
  EXPECT_EQ(run("fit --method fg --data " + path("onearm.csv")).code, 3);
}
