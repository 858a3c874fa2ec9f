#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>
#include <unistd.h>

#include "dfir/tensor_io.hpp"
#include "dfir/tools/cli.hpp"
#include "dfir/tools/commands.hpp"
#include "dfir/tools/config.hpp"

using namespace dfir;
using namespace dfir::tools;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dfir");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dfir_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
    ::unsetenv("DFIR_SEED");
  }
  void TearDown() override {
    fs::remove_all(dir_);
    ::unsetenv("DFIR_SEED");
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }
  nlohmann::json read_json(const std::string& name) const {
    std::ifstream in(dir_ / name);
    return nlohmann::json::parse(in);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, VerifyFircPasses) {
  const CliRun r = cli({"verify", "--block", "firc3", "--dtype", "f64", "--out", path("r.json")});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  const nlohmann::json j = read_json("r.json");
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("summary").at("failed"), 0);
  EXPECT_GT(j.at("cases").size(), 0u);
}

TEST_F(CliTest, ZeroToleranceFails) {
  const CliRun r = cli({"verify", "--block", "dcfa", "--tolerance", "0"});
  EXPECT_EQ(r.code, kExitFailures);
  EXPECT_NE(r.out.find("fail"), std::string::npos);
}

TEST_F(CliTest, MalformedConfigWritesNoReport) {
  write("bad.json", "{ \"block\": ");
  const CliRun r = cli({"verify", "--config", path("bad.json"), "--out", path("r.json")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_FALSE(r.err.empty());
  EXPECT_FALSE(fs::exists(path("r.json")));
}

TEST_F(CliTest, UnknownConfigKeyIsRejected) {
  write("c.json", R"({"block": "core", "colour": 1})");
  const CliRun r = cli({"verify", "--config", path("c.json")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"verify", "--block", "nope"}).code, kExitUsage);
  EXPECT_EQ(cli({"verify", "--dtype", "f16"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({"--version"}).code, kExitOk);
}

TEST_F(CliTest, SeedPrecedence) {
  write("c.json", R"({"block": "core", "seed": 3})");
  const std::vector<std::string> base{"verify", "--config", path("c.json"), "--out", path("r.json")};
  auto seeds = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    EXPECT_EQ(cli(args).code, kExitOk);
    return read_json("r.json").at("config").at("seeds").get<std::vector<std::uint64_t>>();
  };
  EXPECT_EQ(seeds({}), std::vector<std::uint64_t>{3});
  ::setenv("DFIR_SEED", "5", 1);
  EXPECT_EQ(seeds({}), std::vector<std::uint64_t>{5});
  EXPECT_EQ(seeds({"--seeds", "9"}), std::vector<std::uint64_t>{9});
}

TEST_F(CliTest, ConfigRoundTrip) {
  RunConfig c;
  c.block = "dfpn";
  c.dtype = DType::f32;
  c.seeds = {1, 2};
  c.tolerance = 1e-3;
  c.bench.runs = 3;
  const RunConfig back = parse_config(config_to_json(c));
  EXPECT_EQ(back.block, "dfpn");
  EXPECT_EQ(back.dtype, DType::f32);
  EXPECT_EQ(back.seeds, c.seeds);
  EXPECT_EQ(back.tolerance, c.tolerance);
  EXPECT_EQ(back.bench.runs, 3u);
}

TEST_F(CliTest, SeedListParsing) {
  EXPECT_EQ(parse_seed_list("0,1, 7"), (std::vector<std::uint64_t>{0, 1, 7}));
  EXPECT_THROW(parse_seed_list("1,x"), ConfigError);
  EXPECT_THROW(parse_seed_list(""), ConfigError);
}

TEST_F(CliTest, BenchSingleRunMedianIsTheSample) {
  RunConfig c;
  c.bench.tokens = {32};
  c.bench.k_divisors = {4};
  c.bench.conv_extents = {};
  c.bench.runs = 1;
  const SuiteReport r = run_bench(c);
  ASSERT_EQ(r.benchmarks.size(), 2u);
  for (const BenchRecord& b : r.benchmarks) {
    ASSERT_EQ(b.samples_ms.size(), 1u);
    EXPECT_EQ(b.median_ms, b.samples_ms[0]);
  }
}

TEST_F(CliTest, BenchRowCount) {
  RunConfig c;
  c.bench.tokens = {16, 32, 64};
  c.bench.conv_extents = {};
  c.bench.runs = 1;
  const SuiteReport r = run_bench(c);
  EXPECT_EQ(r.benchmarks.size(), 6u);
  EXPECT_EQ(r.soft_checks.size(), 3u);
}

TEST_F(CliTest, BenchWritesReport) {
  write("c.json", R"({"bench": {"tokens": [16], "conv_extents": [8], "runs": 2}})");
  const CliRun r = cli({"bench", "--config", path("c.json"), "--out", path("b.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const nlohmann::json j = read_json("b.json");
  EXPECT_EQ(j.at("benchmarks").size(), 4u);
  EXPECT_EQ(j.at("soft_checks").size(), 1u);
}

TEST_F(CliTest, DemoKeepsShape) {
  const CliRun r = cli({"demo", "--block", "dcfa", "--out", path("y.dfir")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(io::read_tensor(path("y.dfir")).shape(), (Shape{1, 16, 8, 8}));
  const nlohmann::json j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("output_shape"), j.at("input_shape"));
}

TEST_F(CliTest, AnupDemoKeepsMass) {
  const CliRun r = cli({"demo", "--block", "anup", "--input", "ones", "--shape", "1,1,2,2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const nlohmann::json j = nlohmann::json::parse(r.out);
  std::map<std::string, double> l1;
  for (const auto& s : j.at("stages")) l1[s.at("stage").get<std::string>()] = s.at("l1").get<double>();
  EXPECT_EQ(l1.at("input"), 4.0);
  EXPECT_EQ(l1.at("normalized"), 4.0);
}

TEST_F(CliTest, DemoFixturesAreReproducible) {
  for (const char* block : {"dcfa", "dfpn", "firc3"}) {
    ASSERT_EQ(cli({"demo", "--block", block, "--seeds", "4", "--out", path("a.dfir")}).code, kExitOk);
    ASSERT_EQ(cli({"demo", "--block", block, "--seeds", "4", "--out", path("b.dfir")}).code, kExitOk);
    std::ifstream a(path("a.dfir"), std::ios::binary), b(path("b.dfir"), std::ios::binary);
    const std::string sa{std::istreambuf_iterator<char>(a), {}}, sb{std::istreambuf_iterator<char>(b), {}};
    EXPECT_FALSE(sa.empty());
    EXPECT_EQ(sa, sb) << block;
  }
}

TEST_F(CliTest, DemoFixtureShapeMismatch) {
  ASSERT_EQ(cli({"fixtures-gen", "--out", path("fx")}).code, kExitOk);
  const CliRun ok = cli({"demo", "--block", "dcfa", "--input", path("fx/dcfa_input.dfir")});
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  const CliRun bad = cli({"demo", "--block", "dcfa", "--input", path("fx/dcfa_input.dfir"), "--shape", "1,8,8,8"});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_NE(bad.err.find("shape"), std::string::npos);
  const CliRun wrong_block = cli({"demo", "--block", "firc3", "--input", path("fx/ones_2x2.dfir")});
  EXPECT_EQ(wrong_block.code, kExitUsage);
}
