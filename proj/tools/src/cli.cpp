#include "dfir/tools/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "dfir/tensor_io.hpp"
#include "dfir/tools/commands.hpp"

namespace dfir::tools {
namespace {

// Raw flag values; an option counts only when it was given.
struct Flags {
  std::string config_path;
  std::string block;
  std::string dtype;
  double tolerance = 0.0;
  std::string seeds;
  std::string out;
  std::size_t threads = 1;
  std::string input;
  std::string shape;
  std::size_t runs = 0;

  CLI::Option* config_opt = nullptr;
  CLI::Option* block_opt = nullptr;
  CLI::Option* dtype_opt = nullptr;
  CLI::Option* tolerance_opt = nullptr;
  CLI::Option* seeds_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* input_opt = nullptr;
  CLI::Option* shape_opt = nullptr;
  CLI::Option* runs_opt = nullptr;
};

void add_common(CLI::App& cmd, Flags& f, const std::string& block_help) {
  f.config_opt = cmd.add_option("--config", f.config_path, "JSON run configuration");
  f.block_opt = cmd.add_option("--block", f.block, block_help);
  f.dtype_opt = cmd.add_option("--dtype", f.dtype, "f32 or f64");
  f.seeds_opt = cmd.add_option("--seeds", f.seeds, "comma-separated seeds");
  f.out_opt = cmd.add_option("--out", f.out, "output path");
  f.threads_opt = cmd.add_option("--threads", f.threads, "worker threads; 1 disables parallelism");
}

std::uint64_t env_seed(const char* text) {
  const std::vector<std::uint64_t> seeds = parse_seed_list(text);
  if (seeds.size() != 1) throw ConfigError("DFIR_SEED must hold a single seed");
  return seeds.front();
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config_opt && f.config_opt->count() ? load_config(f.config_path) : RunConfig{};
  if (const char* env = std::getenv("DFIR_SEED"); env && *env) {
    c.seed = env_seed(env);
    c.seeds.clear();
  }
  if (f.block_opt && f.block_opt->count()) c.block = f.block;
  if (f.dtype_opt && f.dtype_opt->count()) {
    try {
      c.dtype = parse_dtype(f.dtype);
    } catch (const Error& e) {
      throw ConfigError(std::string("--dtype: ") + e.what());
    }
  }
  if (f.tolerance_opt && f.tolerance_opt->count()) c.tolerance = f.tolerance;
  if (f.seeds_opt && f.seeds_opt->count()) c.seeds = parse_seed_list(f.seeds);
  if (f.out_opt && f.out_opt->count()) c.out = f.out;
  if (f.threads_opt && f.threads_opt->count()) c.threads = f.threads;
  if (f.input_opt && f.input_opt->count()) c.input = f.input;
  if (f.shape_opt && f.shape_opt->count()) c.shape = parse_shape(f.shape);
  if (f.runs_opt && f.runs_opt->count()) c.bench.runs = f.runs;
  c.validate();
  return c;
}

void print_verify(const SuiteReport& report, std::ostream& out) {
  for (const auto& suite : report.suites) {
    for (const auto& c : suite.cases) {
      if (c.status == verify::CaseStatus::pass) continue;
      out << status_name(c.status) << "  " << c.name << "  err=" << c.max_rel_err << " tol=" << c.tolerance;
      if (!c.message.empty()) out << "  (" << c.message << ")";
      out << "\n";
    }
    out << suite.suite << ": " << suite.passed << " passed, " << suite.failed << " failed, " << suite.errored
        << " errored\n";
  }
}

void print_bench(const SuiteReport& report, std::ostream& out) {
  for (const BenchRecord& b : report.benchmarks) {
    out << std::left << std::setw(16) << b.op;
    for (const auto& [key, value] : b.sizes) out << " " << key << "=" << value;
    out << "  median " << b.median_ms << " ms over " << b.runs << " runs\n";
  }
  for (const SoftCheck& c : report.soft_checks) {
    out << (c.holds ? "holds    " : "violated ") << c.name << "  " << c.detail << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Verification, benchmark and demo harness for the dfir kernels", "dfir"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Flags verify_flags, bench_flags, demo_flags, fixture_flags;
  CLI::App* verify = app.add_subcommand("verify", "run property suites");
  add_common(*verify, verify_flags, "dcfa, dfpn, firc3, core or all");
  verify_flags.tolerance_opt = verify->add_option("--tolerance", verify_flags.tolerance, "override every tolerance");

  CLI::App* bench = app.add_subcommand("bench", "time attention and convolution paths");
  add_common(*bench, bench_flags, "ignored");
  bench_flags.runs_opt = bench->add_option("--runs", bench_flags.runs, "repetitions per measurement");

  CLI::App* demo = app.add_subcommand("demo", "one forward pass with per-stage statistics");
  add_common(*demo, demo_flags, "dcfa, dfpn, firc3 or anup");
  demo_flags.input_opt = demo->add_option("--input", demo_flags.input, "random, ones or a fixture path");
  demo_flags.shape_opt = demo->add_option("--shape", demo_flags.shape, "B,C,H,W");

  CLI::App* fixtures = app.add_subcommand("fixtures-gen", "write demo input and output fixtures");
  add_common(*fixtures, fixture_flags, "ignored");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "dfir: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (verify->parsed()) {
      const RunConfig config = resolve(verify_flags);
      const SuiteReport report = run_verify(config);
      print_verify(report, out);
      if (config.out) write_report(report, *config.out);
      return report.ok() ? kExitOk : kExitFailures;
    }
    if (bench->parsed()) {
      const RunConfig config = resolve(bench_flags);
      const SuiteReport report = run_bench(config);
      print_bench(report, out);
      if (config.out) write_report(report, *config.out);
      return kExitOk;
    }
    if (demo->parsed()) {
      RunConfig config = resolve(demo_flags);
      if (config.block == "all") config.block = "dcfa";
      if (config.block == "core") throw ConfigError("demo needs --block dcfa, dfpn, firc3 or anup");
      const Tensor input = demo_input(config);
      const DemoResult result = run_demo(config, input);
      out << to_json(result).dump(2) << "\n";
      if (config.out) io::write_tensor(result.output, *config.out);
      return kExitOk;
    }
    const RunConfig config = resolve(fixture_flags);
    for (const auto& path : generate_fixtures(config, config.out.value_or("fixtures"))) out << path.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "dfir: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace dfir::tools
