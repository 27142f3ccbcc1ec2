#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "crko_cli_test.log";
  const std::string cmd = std::string(CRKO_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("crko_cli_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Cli, UnknownSubcommandIsConfigError) {
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

TEST(Cli, UnsafeParamsNeedTheFlag) {
  const fs::path d = scratch("unsafe");
  const CliRun r = cli("selfref --n 3 --ell 4 --trials 100 --out " + d.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("unsafe"), std::string::npos);
  EXPECT_EQ(cli("selfref --n 3 --ell 4 --trials 100 --unsafe-params --workers 1 --out " + d.string()).code, 0);
  const std::string csv = slurp(d / "selfref.csv");
  EXPECT_EQ(csv.rfind("# config_hash=", 0), 0U);
  EXPECT_NE(csv.find("unsafe_params=1"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(d / "selfref.json"));
  EXPECT_TRUE(j.at("unsafe_params").get<bool>());
}

TEST(Cli, CapViolationReportsSize) {
  const fs::path d = scratch("cap");
  const CliRun r = cli("export-table --n 4 --ell 9 --cap 10 --out " + d.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("2^16"), std::string::npos);
}

TEST(Cli, MalformedConfig) {
  const fs::path d = scratch("badcfg");
  fs::create_directories(d);
  std::ofstream(d / "c.json") << "{ not json";
  EXPECT_EQ(cli("selfref --config " + (d / "c.json").string()).code, 2);
  std::ofstream(d / "d.json") << R"({"command":"spectrum"})";
  EXPECT_EQ(cli("selfref --config " + (d / "d.json").string()).code, 2);
}

TEST(Cli, PairwiseEquality) {
  const fs::path d = scratch("pairs");
  const CliRun r = cli("game --variant pairwise-equality --seeds 50 --workers 1 --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("G2.1==G2.2: 50/50"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("G3.1==G3.2: 50/50"), std::string::npos) << r.out;
}

TEST(Cli, SpectrumCsvShape) {
  const fs::path d = scratch("spectrum");
  ASSERT_EQ(cli("spectrum --n 3 --ell 8 --samples 5 --workers 1 --out " + d.string()).code, 0);
  std::ifstream in(d / "spectrum.csv");
  std::string line;
  int rows = 0;
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line, "sample,tv_exact,tv_bound,threshold,violates");
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

TEST(Cli, ConfigFileReproducesBytes) {
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  fs::create_directories(a);
  std::ofstream(a / "cfg.json") << R"({"n":4,"ell":9,"seed":7,"trials":200})";
  ASSERT_EQ(cli("crises --config " + (a / "cfg.json").string() + " --workers 2 --out " + a.string()).code, 0);
  ASSERT_EQ(cli("crises --config " + (a / "cfg.json").string() + " --workers 1 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "crises.csv"), slurp(b / "crises.csv"));
  EXPECT_EQ(slurp(a / "crises.json"), slurp(b / "crises.json"));
  // flags override the file and change the hash
  ASSERT_EQ(cli("crises --config " + (a / "cfg.json").string() + " --seed 8 --out " + b.string()).code, 0);
  EXPECT_NE(slurp(a / "crises.csv").substr(0, 32), slurp(b / "crises.csv").substr(0, 32));
}

TEST(Cli, DemoPeelSingle) {
  const fs::path d = scratch("demo");
  const CliRun r = cli("demo --attack peel-single --n 8 --trials 200 --workers 1 --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(d / "demo.json"));
  EXPECT_GT(j["summary"]["broken_single"]["advantage"].get<double>(), 0.95);
  EXPECT_LT(j["summary"]["full"]["advantage"].get<double>(), 0.05);
}
