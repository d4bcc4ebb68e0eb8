#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = gbh::cli::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gbhammer_cli_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Cli, ListScenarios) {
  const auto r = cli({"list-scenarios"});
  EXPECT_EQ(r.code, 0);
  for (const char* n : {"binary_exec", "data_snoop", "victim_loop", "riscv_span"})
    EXPECT_NE(r.out.find(n), std::string::npos) << n;
}

TEST(Cli, GeometryPrintsTheBitOffset) {
  auto r = cli({"geometry", "--isa", "x86_64", "--va", "0x20000"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("2056"), std::string::npos);
  r = cli({"geometry", "--isa", "rv39", "--va", "0x200000", "--level", "1"});
  EXPECT_NE(r.out.find("69"), std::string::npos);
  r = cli({"geometry", "--isa", "armv7", "--va", "0x20000"});
  EXPECT_NE(r.out.find("1035"), std::string::npos);
  EXPECT_EQ(cli({"geometry", "--isa", "sparc", "--va", "0x20000"}).code, 2);
}

TEST(Cli, RunBuiltin) {
  const auto r = cli({"run", "binary_exec", "--seed", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Actual output: 2"), std::string::npos);
}

TEST(Cli, FailedExploitStillExitsZero) {
  const auto r = cli({"run", "binary_exec", "--set", "tlb.honor_global=false"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Actual output: 1"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  auto r = cli({"run", "no_such_scenario"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("binary_exec"), std::string::npos);
  r = cli({"run", "binary_exec", "--set", "tlb.bogus=1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("tlb.bogus"), std::string::npos);
  EXPECT_EQ(cli({"run"}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
}

TEST(Cli, RunsAScenarioFile) {
  const auto path = temp_path("scenario.json");
  {
    std::ofstream f(path);
    f << R"({"processes": [{"name": "p", "script": [{"tick": 1, "action": "PRINT", "text": "hello"}]}],
             "verdict": {"rules": [{"actor": "p", "equals": "hello"}]}})";
  }
  const auto r = cli({"run", path.string()});
  std::filesystem::remove(path);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("hello"), std::string::npos);
}

TEST(Cli, ReportsAreByteIdenticalAcrossRuns) {
  const auto a = temp_path("a.json"), b = temp_path("b.json"), ta = temp_path("a.trace"), tb = temp_path("b.trace");
  ASSERT_EQ(cli({"run", "data_snoop", "--seed", "9", "--report", a.string(), "--trace", ta.string()}).code, 0);
  ASSERT_EQ(cli({"run", "data_snoop", "--seed", "9", "--report", b.string(), "--trace", tb.string()}).code, 0);
  const auto ra = slurp(a), tra = slurp(ta);
  EXPECT_FALSE(ra.empty());
  EXPECT_FALSE(tra.empty());
  EXPECT_EQ(ra, slurp(b));
  EXPECT_EQ(tra, slurp(tb));
  for (const auto& p : {a, b, ta, tb}) std::filesystem::remove(p);
}

TEST(Cli, EffectiveConfigEchoesOverrides) {
  const auto r = cli({"run", "binary_exec", "--json", "--set", "tlb.entries=32", "os.pic_relocation=true"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"entries\": 32"), std::string::npos);
  EXPECT_NE(r.out.find("\"pic_relocation\": true"), std::string::npos);
  const auto s = cli({"show", "binary_exec", "--set", "tlb.entries=16"});
  EXPECT_NE(s.out.find("\"entries\": 16"), std::string::npos);
}

TEST(Cli, SweepKeepsValueOrder) {
  const auto r = cli({"sweep", "binary_exec", "--param", "tlb.honor_global", "--values", "true,false,true"});
  EXPECT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].rfind("true", 0), 0u);
  EXPECT_EQ(rows[2].rfind("false", 0), 0u);
  EXPECT_EQ(rows[3].rfind("true", 0), 0u);
}
