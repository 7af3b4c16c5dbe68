#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "indimart/cli.hpp"
#include "indimart/io.hpp"
#include "support.hpp"

using namespace indimart;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("indimart_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("INDIMART_SEED");
  }
  void TearDown() override {
    unsetenv("INDIMART_SEED");
    fs::remove_all(dir_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string read(const std::string& name) const { return read_file(path(name)); }
  void write(const std::string& name, const std::string& text) const { write_file(path(name), text); }

  std::string worked_input() const {
    const FilteredMartingale fm{support::four_points(), support::worked_filtration(), 1,
                                support::worked_martingale()};
    const std::string p = path("worked.json");
    write_file(p, to_json(fm).dump(2));
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateWritesAnEightLeafMartingale) {
  ASSERT_EQ(run_cli({"generate", "--seed", "42", "--K", "3", "--branching", "2", "--out-dir", path("g")}), kExitOk);
  const FilteredMartingale fm = martingale_from_json(parse_json(read("g/martingale.json")));
  EXPECT_EQ(fm.space.size(), 8u);
  EXPECT_LE(is_martingale(fm.X, fm.filtration, fm.space, 1e-10), 1e-10);
}

TEST_F(Cli, GenerateIsDeterministic) {
  ASSERT_EQ(run_cli({"generate", "--seed", "9", "--K", "2", "--out-dir", path("a")}), kExitOk);
  ASSERT_EQ(run_cli({"generate", "--seed", "9", "--K", "2", "--out-dir", path("b")}), kExitOk);
  EXPECT_EQ(read("a/martingale.json"), read("b/martingale.json"));
}

TEST_F(Cli, GenerateVectorValued) {
  ASSERT_EQ(run_cli({"generate", "--seed", "1", "--K", "2", "--m", "2", "--out-dir", path("v")}), kExitOk);
  const json j = parse_json(read("v/martingale.json"));
  EXPECT_EQ(j["m"], 2);
  for (const auto& entry : j["martingale"]) {
    for (const auto& [id, value] : entry["values"].items()) EXPECT_EQ(value.size(), 2u) << id;
  }
}

TEST_F(Cli, EnvironmentSeedOverridesFlag) {
  ASSERT_EQ(run_cli({"generate", "--seed", "5", "--K", "2", "--out-dir", path("flag")}), kExitOk);
  setenv("INDIMART_SEED", "5", 1);
  ASSERT_EQ(run_cli({"generate", "--seed", "6", "--K", "2", "--out-dir", path("env")}), kExitOk);
  EXPECT_EQ(read("flag/martingale.json"), read("env/martingale.json"));
  setenv("INDIMART_SEED", "five", 1);
  EXPECT_EQ(run_cli({"generate", "--K", "2", "--out-dir", path("bad")}), kExitBadInput);
}

TEST_F(Cli, GenerateRejectsInvalidParameters) {
  EXPECT_EQ(run_cli({"generate", "--K", "0", "--out-dir", path("x")}), kExitBadInput);
  EXPECT_EQ(run_cli({"generate", "--branching", "1", "--out-dir", path("x")}), kExitBadInput);
  EXPECT_EQ(run_cli({"generate", "--weights", "heavy", "--out-dir", path("x")}), kExitBadInput);
  EXPECT_EQ(run_cli({"frobnicate"}), kExitBadInput);
  EXPECT_EQ(run_cli(std::vector<std::string>{}), kExitBadInput);
}

TEST_F(Cli, DecomposeWorkedExample) {
  ASSERT_EQ(run_cli({"decompose", "--input", worked_input(), "--out-dir", path("d")}), kExitOk);
  const std::string norms = read("d/norms.csv");
  EXPECT_NE(norms.find("\n1,2,2.25,3.25,2.5,3.5,"), std::string::npos);
  EXPECT_NE(norms.find("\n2,2,0.25,0.25,2.5,3.5,"), std::string::npos);
  EXPECT_EQ(read("d/stages.csv"), "k,n,residual_norm\n1,1,0\n2,1,0.5\n2,2,0\n");
  EXPECT_FALSE(fs::exists(path("d/martingale.json")));
  EXPECT_EQ(run_cli({"verify", "--input", path("d/decomposition.json"), "--out-dir", path("d")}), kExitOk);
  EXPECT_TRUE(parse_json(read("d/report.json"))["pass"].get<bool>());
  EXPECT_NE(read("d/report.txt").find("overall: PASS"), std::string::npos);
}

TEST_F(Cli, DecomposeZeroMartingale) {
  const std::vector<RandomVector> zero{RandomVector(4, 1), RandomVector(4, 1)};
  const FilteredMartingale fm{support::four_points(), support::worked_filtration(), 1, zero};
  write("zero.json", to_json(fm).dump());
  ASSERT_EQ(run_cli({"decompose", "--input", path("zero.json"), "--out-dir", path("z")}), kExitOk);
  EXPECT_EQ(read("z/stages.csv"), "k,n,residual_norm\n");
  EXPECT_EQ(run_cli({"verify", "--input", path("z/decomposition.json"), "--out-dir", path("z")}), kExitOk);
}

TEST_F(Cli, DecomposeRejectsBadInput) {
  json j = parse_json(read_file(worked_input()));
  j["points"][0]["weight"] = 0.15;
  write("bad_weights.json", j.dump());
  EXPECT_EQ(run_cli({"decompose", "--input", path("bad_weights.json"), "--out-dir", path("o")}), kExitBadInput);

  EXPECT_EQ(run_cli({"decompose", "--input", path("missing.json"), "--out-dir", path("o")}), kExitBadInput);
  write("garbage.json", "[1, 2");
  EXPECT_EQ(run_cli({"decompose", "--input", path("garbage.json"), "--out-dir", path("o")}), kExitBadInput);
  EXPECT_EQ(run_cli({"decompose", "--input", worked_input(), "--tol-rel", "1.5", "--out-dir", path("o")}),
            kExitBadInput);
  EXPECT_EQ(run_cli({"decompose", "--input", worked_input(), "--n-max", "0", "--out-dir", path("o")}),
            kExitBadInput);
}

TEST_F(Cli, DecomposeRejectsNonMartingales) {
  json j = parse_json(read_file(worked_input()));
  j["martingale"][1]["values"]["4"] = {0};
  write("not_martingale.json", j.dump());
  EXPECT_EQ(run_cli({"decompose", "--input", path("not_martingale.json"), "--out-dir", path("o")}),
            kExitPrecondition);

  json nonzero_start = parse_json(read_file(worked_input()));
  nonzero_start["martingale"].push_back(
      {{"t", 0}, {"values", {{"1", {1}}, {"2", {1}}, {"3", {1}}, {"4", {1}}}}});
  write("start.json", nonzero_start.dump());
  EXPECT_EQ(run_cli({"decompose", "--input", path("start.json"), "--out-dir", path("o")}), kExitPrecondition);
}

TEST_F(Cli, TruncatedRunVerifies) {
  ASSERT_EQ(run_cli({"decompose", "--input", worked_input(), "--n-max", "1", "--out-dir", path("t")}), kExitOk);
  const json d = parse_json(read("t/decomposition.json"));
  EXPECT_FALSE(d["truncation"]["converged"].get<bool>());
  EXPECT_EQ(run_cli({"verify", "--input", path("t/decomposition.json"), "--out-dir", path("t")}), kExitOk);
}

TEST_F(Cli, FaultInjectedFileFailsVerification) {
  ASSERT_EQ(run_cli({"decompose", "--input", worked_input(), "--out-dir", path("f")}), kExitOk);
  json d = parse_json(read("f/decomposition.json"));
  for (auto& entry : d["increments"]) {
    if (entry["n"] == 1 && entry["k"] == 2) entry["values"]["3"] = {-1.0};
  }
  d.erase("martingales");
  write("f/corrupt.json", d.dump());
  testing::internal::CaptureStderr();
  const int code = run_cli({"verify", "--input", path("f/corrupt.json"), "--out-dir", path("f")});
  const std::string err = testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, kExitCheckFailed);
  EXPECT_NE(err.find("failed check: independence_of_past"), std::string::npos) << err;
  EXPECT_FALSE(parse_json(read("f/report.json"))["pass"].get<bool>());
}

TEST_F(Cli, VerifyRejectsMalformedInput) {
  write("bad.json", R"({"points": []})");
  EXPECT_EQ(run_cli({"verify", "--input", path("bad.json"), "--out-dir", path("o")}), kExitBadInput);
  EXPECT_EQ(run_cli({"verify", "--out-dir", path("o")}), kExitBadInput);
}

TEST_F(Cli, RoundTripIsByteDeterministic) {
  for (const std::string run : {"r1", "r2"}) {
    ASSERT_EQ(run_cli({"decompose", "--seed", "7", "--K", "3", "--branching", "2", "--format", "json",
                       "--out-dir", path(run)}),
              kExitOk);
    ASSERT_EQ(run_cli({"verify", "--input", path(run + "/decomposition.json"), "--out-dir", path(run)}),
              kExitOk);
  }
  for (const std::string file :
       {"martingale.json", "decomposition.json", "norms.csv", "stages.csv", "report.json", "report.txt"}) {
    EXPECT_EQ(read("r1/" + file), read("r2/" + file)) << file;
  }
}
