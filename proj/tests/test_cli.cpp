#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskcontract;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("riskcontract_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) const {
    const std::string cmd = std::string(RISKCONTRACT_CLI) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    Result r;
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  static std::string scenario(const std::string& name) {
    return std::string(RISKCONTRACT_SCENARIO_DIR) + "/" + name + ".ini";
  }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    const auto path = dir_ / name;
    std::ofstream(path) << text;
    return path.string();
  }

  static std::string read(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> v;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) v.push_back(l);
    return v;
  }

  fs::path dir_;
};

std::string with_line(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::runtime_error("missing " + from);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_F(Cli, SolveCaseStudy) {
  const auto r = run("solve --scenario " + scenario("fig3_a2") + " --out " + out("o") + " --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  const double K0 = j["K0"][0], m0 = j["m0"], jp = j["J_P_star"];
  EXPECT_NEAR(jp, 5.0 * K0 + m0 + 10.0, 1e-9);
  EXPECT_NEAR(jp, 80.97463004, 1e-7);
  EXPECT_EQ(j["payment_regime"], "no_intermediate_payment");
  EXPECT_EQ(json::parse(read(out("o") + "/summary.json")), j);
  const auto csv = lines(read(out("o") + "/lq_solution.csv"));
  EXPECT_EQ(csv.front(), "t,K_1,m,E_1");
  EXPECT_EQ(csv.size(), 1002u);
}

TEST_F(Cli, SolveWithoutRiskCost) {
  const std::string text = with_line(read(scenario("fig3_a2")), "rho = 5", "rho = 0");
  const auto r = run("solve --scenario " + write("zero.ini", text) + " --out " + out("o") +
                     " --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["J_P_star"], 10.0);
  const auto csv = lines(read(out("o") + "/lq_solution.csv"));
  for (std::size_t k = 1; k < csv.size(); ++k) EXPECT_EQ(csv[k].substr(csv[k].rfind(',')), ",0");
}

TEST_F(Cli, SolveNetworkTerminalRow) {
  const auto r = run("solve --scenario " + scenario("fig6_case2") + " --out " + out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = lines(read(out("o") + "/lq_solution.csv"));
  EXPECT_EQ(csv.front(), "t,K_1,K_2,K_3,K_4,m,E_1,E_2,E_3,E_4");
  const auto& last = csv.back();
  const std::string e = "3.3333333333333335";
  EXPECT_EQ(last.substr(last.size() - 4 * e.size() - 3),
            e + "," + e + "," + e + "," + e);
}

TEST_F(Cli, ValidationFailureExitsWithTwo) {
  const std::string text = with_line(read(scenario("fig3_a2")), "y0 = 5", "y0 = 0");
  const auto r = run("solve --scenario " + write("bad.ini", text) + " --out " + out("o"));
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("y0 must be strictly positive"), std::string::npos) << r.out;
}

TEST_F(Cli, ParseErrorExitsWithTwo) {
  const std::string text = with_line(read(scenario("fig3_a2")), "horizon = 1", "horizon = one");
  const auto r = run("solve --scenario " + write("bad.ini", text) + " --out " + out("o"));
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("horizon"), std::string::npos) << r.out;
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("solve --scenario /no/such/file.ini --out " + out("o")).code, 2);
  EXPECT_EQ(run("solve --scenario " + scenario("fig3_a2") + " --dt -1").code, 2);
  EXPECT_EQ(run("solve --scenario " + scenario("fig3_a2") + " --paths 0").code, 2);
  EXPECT_EQ(run("hjb --scenario " + scenario("fig3_a2") + " --grid 3").code, 2);
  EXPECT_EQ(run("hjb --scenario " + scenario("fig4_case1") + " --out " + out("o")).code, 2);
  EXPECT_EQ(run("verify --scenario " + scenario("fig3_a2") + " --contract other").code, 2);
  EXPECT_EQ(run("reproduce fig5 --out " + out("o")).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, NumericalFailureExitsWithThree) {
  // Growth rate 2000 overflows double precision well before the horizon.
  const std::string text = with_line(read(scenario("fig3_a2")), "a = 2", "a = 2000");
  const auto r = run("simulate --scenario " + write("blowup.ini", text) + " --out " + out("o") +
                     " --paths 10");
  EXPECT_EQ(r.code, 3) << r.out;
}

TEST_F(Cli, SimulateIsDeterministicGivenSeed) {
  const std::string base = "simulate --scenario " + scenario("fig4_case2") + " --paths 300";
  ASSERT_EQ(run(base + " --out " + out("a")).code, 0);
  ASSERT_EQ(run(base + " --out " + out("b")).code, 0);
  ASSERT_EQ(run(base + " --out " + out("c") + " --seed 7").code, 0);
  const auto a = read(out("a") + "/ensemble_summary.csv");
  EXPECT_EQ(a, read(out("b") + "/ensemble_summary.csv"));
  EXPECT_NE(a, read(out("c") + "/ensemble_summary.csv"));
  EXPECT_EQ(lines(a).front(), "t,mean_Y_1,mean_Y_2,var_Y_1,var_Y_2,mean_c,var_c");
}

TEST_F(Cli, SimulateJsonAndPerPathDump) {
  const auto r = run("simulate --scenario " + scenario("fig3_a1") + " --paths 5 --dt 0.01 --seed 9 " +
                     "--per-path --json --out " + out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["n_paths"], 5);
  EXPECT_EQ(j["seed"], 9);
  EXPECT_EQ(j["dt"], 0.01);
  const auto paths = lines(read(out("o") + "/paths.csv"));
  EXPECT_EQ(paths.front(), "path,t,Y_1,c,M");
  EXPECT_EQ(paths.size(), 1u + 5u * 101u);
}

TEST_F(Cli, SimulateNonLinearQuadraticScenario) {
  const auto r = run("simulate --scenario " + scenario("single_node_quartic") +
                     " --paths 200 --grid 100,100 --json --out " + out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["n_paths"], 200);
}

TEST_F(Cli, VerifyOptimalContractPasses) {
  const auto r = run("verify --scenario " + scenario("fig3_a2") + " --paths 2000 --json --out " +
                     out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_TRUE(j["pass"]);
  EXPECT_EQ(j["ic"]["deviations"].size(), 10u);
  const auto report = read(out("o") + "/verify_report.txt");
  EXPECT_NE(report.find("overall PASS"), std::string::npos);
  EXPECT_NE(report.find("  scale 0.8 | "), std::string::npos);
}

TEST_F(Cli, VerifyHalvedInitialPaymentFailsIR) {
  const auto r = run("verify --scenario " + scenario("fig3_a2") +
                     " --paths 2000 --contract c0-half --json --out " + out("o"));
  EXPECT_EQ(r.code, 4) << r.out;
  const json j = json::parse(r.out);
  EXPECT_FALSE(j["ir"]["pass"]);
  EXPECT_GT(j["ir"]["estimate"].get<double>(), -10.0);
}

TEST_F(Cli, VerifyZeroSensitivityFailsIC) {
  const auto r = run("verify --scenario " + scenario("fig3_a2") +
                     " --paths 500 --contract zeta-zero --json --out " + out("o"));
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_FALSE(json::parse(r.out)["ic"]["pass"]);
}

TEST_F(Cli, HjbReportsLinearQuadraticReference) {
  const auto r = run("hjb --scenario " + scenario("fig3_a2") + " --json --out " + out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_LT(j["relative_error"].get<double>(), 0.02);
  EXPECT_EQ(j["ny"], 400);
  const auto grid = lines(read(out("o") + "/value_grid.csv"));
  EXPECT_EQ(grid.front(), "t,y,V,zeta_star,effort_star");
  EXPECT_EQ(grid.size(), 1u + 401u * 400u);
  EXPECT_EQ(lines(read(out("o") + "/payment_schedule.csv")).front(), "t,p_star");
}

TEST_F(Cli, BenchmarkCertaintyEquivalence) {
  const auto r = run("benchmark --scenario " + scenario("fig6_case3") + " --json --out " +
                     out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_LE(std::abs(json::parse(r.out)["information_rent"].get<double>()), 1e-10);
}

TEST_F(Cli, ReproduceFig3) {
  const auto r = run("reproduce fig3 --out " + out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(read(out("o") + "/fig3_assertions.json"));
  EXPECT_TRUE(j["pass"]);
  for (const auto& a : j["assertions"]) EXPECT_TRUE(a["pass"]) << a["name"];
  const auto effort = lines(read(out("o") + "/fig3_effort.csv"));
  EXPECT_EQ(effort.size(), 1002u);
  EXPECT_TRUE(fs::exists(out("o") + "/fig3_risk.csv"));
  EXPECT_TRUE(fs::exists(out("o") + "/fig3_payment.csv"));
}

TEST_F(Cli, ReproduceFailedAssertionExitsWithThree) {
  // Swapping the growth rates of the A=1 and A=3 inputs breaks the ordering.
  const fs::path sdir = dir_ / "scenarios";
  fs::create_directories(sdir);
  for (const char* name : {"fig3_a1", "fig3_a2", "fig3_a3"})
    fs::copy_file(scenario(name), sdir / (std::string(name) + ".ini"));
  std::ofstream(sdir / "fig3_a1.ini") << with_line(read(scenario("fig3_a1")), "a = 1", "a = 3");
  std::ofstream(sdir / "fig3_a3.ini") << with_line(read(scenario("fig3_a3")), "a = 3", "a = 1");
  const auto r = run("reproduce fig3 --scenario-dir " + sdir.string() + " --out " + out("o"));
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_FALSE(json::parse(read(out("o") + "/fig3_assertions.json"))["pass"]);
}
