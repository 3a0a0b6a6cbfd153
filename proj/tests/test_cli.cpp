#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "dppmle/io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "dppmle_cli_test";
  fs::create_directories(dir);
  return dir;
}

// Runs the CLI with output captured to a file; returns the exit status.
int run(const std::string& args, std::string* stdout_text = nullptr) {
  const auto out = work_dir() / "stdout.txt";
  const std::string cmd = std::string(DPPMLE_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  if (stdout_text) *stdout_text = dppmle::read_text_file(out.string());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

}  // namespace

TEST(Cli, SolveThreeColumns) {
  std::string out;
  ASSERT_EQ(run("solve --u 1,2,3 --deterministic --out " + path("r3.json"), &out), 0);
  EXPECT_NE(out.find("4 critical points, 4 real, 1 implicit"), std::string::npos) << out;
  EXPECT_NE(out.find("0.1666666667"), std::string::npos) << out;
  const auto doc = dppmle::json::parse(dppmle::read_text_file(path("r3.json")));
  EXPECT_EQ(doc["count"], 4);
}

TEST(Cli, SolveFourColumnsReportsCounts) {
  std::string out;
  ASSERT_EQ(run("solve --u 17,402,88,951,230,64 --seed 42", &out), 0);
  EXPECT_NE(out.find("24 critical points, 24 real, 3 implicit"), std::string::npos) << out;
}

TEST(Cli, DeterministicRunsAreByteIdentical) {
  ASSERT_EQ(run("solve --u 17,402,88,951,230,64 --deterministic --out " + path("d1.json")), 0);
  ASSERT_EQ(run("solve --u 17,402,88,951,230,64 --deterministic --out " + path("d2.json")), 0);
  EXPECT_EQ(dppmle::read_text_file(path("d1.json")), dppmle::read_text_file(path("d2.json")));
}

TEST(Cli, SampleRoundTripsIntoSolve) {
  ASSERT_EQ(run("sample --rows \"1,0,1;0,1,1\" --samples 300 --seed 7 --out " + path("c1.json")), 0);
  ASSERT_EQ(run("sample --rows \"1,0,1;0,1,1\" --samples 300 --seed 7 --out " + path("c2.json")), 0);
  EXPECT_EQ(dppmle::read_text_file(path("c1.json")), dppmle::read_text_file(path("c2.json")));
  const auto u = dppmle::read_counts_file(path("c1.json"));
  EXPECT_EQ(u.total(), 300);
  EXPECT_EQ(run("solve --u " + path("c1.json")), 0);
}

TEST(Cli, RegionsCount) {
  std::string out;
  ASSERT_EQ(run("regions --n 4", &out), 0);
  EXPECT_EQ(out, "24\n");
}

TEST(Cli, VerifyPasses) {
  std::string out;
  ASSERT_EQ(run("verify --n 4 --seed 3", &out), 0);
  EXPECT_NE(out.find("\"passed\": true"), std::string::npos);
}

TEST(Cli, VerifyFailureExitCode) {
  // Stopping monodromy at one solution cannot satisfy the count checks.
  EXPECT_EQ(run("verify --n 4 --target-count 1"), 3);
}

TEST(Cli, IncompleteSolveExitCode) {
  EXPECT_EQ(run("solve --u 1,2,3,4,5,6 --stall-limit 1 --target-count 1000"), 2);
}

TEST(Cli, InputErrorsExitOne) {
  {
    std::ofstream bad(path("bad.json"));
    bad << "{\"n\": 3, \"u\": {\"12\": 1,\n";
  }
  EXPECT_EQ(run("solve --u " + path("bad.json")), 1);
  EXPECT_EQ(run("solve --u 1,2"), 1);
  EXPECT_EQ(run("solve --u 1,2,3 --n 4"), 1);
  EXPECT_EQ(run("solve --u 1,2,3 --deterministic --workers 4"), 1);
  EXPECT_EQ(run("regions --n 12"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("sample --rows \"1,0;0,1\" --samples 10"), 1);
}
