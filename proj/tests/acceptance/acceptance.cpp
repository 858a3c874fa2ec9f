// Acceptance gate: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#include "dfir/suite.hpp"
#include "dfir/tools/cli.hpp"
#include "dfir/tools/commands.hpp"

namespace {

using dfir::verify::Grid;
using dfir::verify::GridPoint;
using dfir::verify::OracleReport;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<std::uint64_t> seeds(std::size_t n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), 0);
  return s;
}

// Runs one registered property, optionally on a different grid, at its own tolerance.
OracleReport run_property(const std::string& suite, const std::string& property, std::vector<std::uint64_t> seed_list,
                          const Grid* grid = nullptr) {
  const dfir::verify::Suite& all = dfir::verify::find_suite(suite);
  dfir::verify::Suite one{suite, {}};
  for (const auto& p : all.properties) {
    if (p.name == property) one.properties.push_back(p);
  }
  if (one.properties.empty()) throw dfir::Error("no property " + suite + "/" + property);
  if (grid) one.properties.front().grid = *grid;
  dfir::verify::RunOptions options;
  options.seeds = std::move(seed_list);
  return dfir::verify::run_suite(one, options);
}

// Folds several property runs into one verdict; every case must pass.
struct Tally {
  std::size_t cases = 0;
  std::size_t bad = 0;
  double worst = 0.0;
  std::string first_bad;

  void add(const OracleReport& r) {
    for (const auto& c : r.cases) {
      ++cases;
      if (std::isfinite(c.max_rel_err)) worst = std::max(worst, c.max_rel_err);
      if (c.status != dfir::verify::CaseStatus::pass) {
        if (bad++ == 0) first_bad = c.name + " " + c.message;
      }
    }
  }
  Outcome outcome(const std::string& extra = "") const {
    std::ostringstream s;
    s << cases << " cases, worst error " << worst;
    if (!extra.empty()) s << ", " << extra;
    if (bad) s << "; " << bad << " not passing, first: " << first_bad;
    return {bad == 0 && cases > 0, s.str()};
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome dense_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Grid grid;
  for (long n : {4, 16, 64, 256})
    for (long d : {4, 8, 16, 32, 64}) grid.push_back(GridPoint{{"N", n}, {"d", d}});
  Tally t;
  t.add(run_property("dcfa", "topk_dense_equivalence", {0}, &grid));
  t.add(run_property("dcfa", "dksa_dense_equivalence", {0}));
  const double secs = seconds_since(t0);
  Outcome o = t.outcome("runtime " + std::to_string(secs) + " s");
  o.pass = o.pass && secs < 30.0;
  return o;
}

Outcome topk_structure() {
  Grid grid;
  for (long n : {4, 16, 64, 256})
    for (long k : {1L, n / 4, n / 2, n - 1}) grid.push_back(GridPoint{{"N", n}, {"K", k}});
  Tally t;
  t.add(run_property("dcfa", "topk_structure", seeds(3), &grid));
  return t.outcome();
}

Outcome amplitude_law() {
  Grid grid{GridPoint{{"s", 1}}, GridPoint{{"s", 2}}, GridPoint{{"s", 3}}, GridPoint{{"s", 4}}};
  Tally t;
  t.add(run_property("dfpn", "anup_amplitude_law", seeds(50), &grid));
  return t.outcome();
}

Outcome channel_shuffle() {
  Tally t;
  t.add(run_property("core", "channel_shuffle_sorted_values", seeds(5)));
  t.add(run_property("core", "channel_shuffle_c4_involution", seeds(5)));
  return t.outcome();
}

Outcome fft_integrity() {
  Grid grid;
  for (long e : {8, 16, 32, 64}) grid.push_back(GridPoint{{"H", e}, {"W", e}});
  grid.push_back(GridPoint{{"H", 12}, {"W", 20}});
  Tally t;
  t.add(run_property("core", "fft_roundtrip", seeds(3), &grid));
  t.add(run_property("core", "fft_parseval", seeds(3), &grid));
  return t.outcome();
}

Outcome periodization() {
  Tally t;
  t.add(run_property("firc3", "kernel_periodization", seeds(3)));
  return t.outcome();
}

Outcome firc_identity() {
  Tally t;
  t.add(run_property("firc3", "firc_delta_identity", seeds(3)));
  return t.outcome();
}

Outcome firc_closed_form() {
  Tally t;
  // Four plane shapes x five seeds: twenty random kernels and inputs.
  t.add(run_property("firc3", "firc_closed_form", seeds(5)));
  t.add(run_property("firc3", "firc_linearity", seeds(5)));
  t.add(run_property("firc3", "firc_shift_equivariance", seeds(5)));
  return t.outcome();
}

Outcome gradients() {
  Tally t;
  for (const char* p : {"gradient_gelu", "gradient_conv2d", "gradient_group_norm", "gradient_masked_softmax"}) {
    t.add(run_property("core", p, seeds(5)));
  }
  t.add(run_property("dcfa", "gradient_sglu", seeds(5)));
  t.add(run_property("dfpn", "gradient_anup", seeds(5)));
  t.add(run_property("dfpn", "gradient_dpsc", seeds(5)));
  const Grid s1{GridPoint{{"s", 1}}};
  t.add(run_property("firc3", "gradient_firc", seeds(5), &s1));
  return t.outcome();
}

Outcome shape_contracts() {
  Grid blocks, pyramid;
  for (long c : {8, 16, 32})
    for (long h : {8, 16}) {
      for (long n : {0, 1, 2}) blocks.push_back(GridPoint{{"C", c}, {"H", h}, {"n", n}});
      for (long l : {1, 2, 3}) pyramid.push_back(GridPoint{{"C", c}, {"H", h}, {"L", l}});
    }
  Tally t;
  t.add(run_property("dcfa", "dcfa_shape_contract", {0}, &blocks));
  t.add(run_property("dfpn", "dfpn_shape_and_call_counts", {0}, &pyramid));
  t.add(run_property("firc3", "firc3_shape_contract", {0}, &blocks));
  return t.outcome();
}

Outcome complexity_trend() {
  dfir::tools::RunConfig config;
  config.bench.tokens = {4096};
  config.bench.k_divisors = {16};
  config.bench.head_dim = 32;
  config.bench.conv_extents = {};
  config.bench.runs = 20;
  const dfir::tools::SuiteReport report = dfir::tools::run_bench(config);
  double dense = NAN, sparse = NAN;
  for (const auto& b : report.benchmarks) {
    if (b.op == "dense_attention") dense = b.median_ms;
    if (b.op == "topk_attention") sparse = b.median_ms;
  }
  std::ostringstream s;
  s << "N=4096 d=32 K=256: topk median " << sparse << " ms, dense median " << dense << " ms over 20 runs";
  return {sparse < dense, s.str()};
}

std::vector<double> report_errors(const std::filesystem::path& path, std::vector<std::string>& names) {
  std::ifstream in(path);
  const nlohmann::json j = nlohmann::json::parse(in);
  std::vector<double> errs;
  for (const auto& c : j.at("cases")) {
    names.push_back(c.at("name").get<std::string>());
    errs.push_back(c.at("max_rel_err").is_null() ? NAN : c.at("max_rel_err").get<double>());
  }
  return errs;
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / ("dfir_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  std::vector<std::vector<double>> errs;
  std::vector<std::vector<std::string>> names;
  std::vector<int> codes;
  for (int run = 0; run < 2; ++run) {
    const std::string out = (dir / ("run" + std::to_string(run) + ".json")).string();
    const char* argv[] = {"dfir", "verify", "--block", "all", "--seeds", "0", "--threads", "1", "--out", out.c_str()};
    std::ostringstream sink;
    codes.push_back(dfir::tools::run_cli(10, argv, sink, sink));
    names.emplace_back();
    errs.push_back(report_errors(out, names.back()));
  }
  std::filesystem::remove_all(dir);
  bool same = names[0] == names[1] && errs[0].size() == errs[1].size() && codes[0] == codes[1];
  for (std::size_t i = 0; same && i < errs[0].size(); ++i) {
    // Bitwise comparison; NaN (errored case) matches NaN.
    same = std::memcmp(&errs[0][i], &errs[1][i], sizeof(double)) == 0 || (std::isnan(errs[0][i]) && std::isnan(errs[1][i]));
  }
  return {same && !errs[0].empty(), std::to_string(errs[0].size()) + " max_rel_err values compared, exit codes " +
                                        std::to_string(codes[0]) + "/" + std::to_string(codes[1])};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"01 dksa dense equivalence", dense_equivalence},
      {"02 top-k structure", topk_structure},
      {"03 anup amplitude law", amplitude_law},
      {"04 channel shuffle", channel_shuffle},
      {"05 fft integrity", fft_integrity},
      {"06 kernel periodization", periodization},
      {"07 firc identity", firc_identity},
      {"08 firc closed form, linearity, shift", firc_closed_form},
      {"09 gradient checks", gradients},
      {"10 shape contracts", shape_contracts},
      {"11 complexity trend", complexity_trend},
      {"12 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-40s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures ? 1 : 0;
}
