#include "dfir/tools/commands.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "dfir/attention.hpp"
#include "dfir/dcfa.hpp"
#include "dfir/dfpn.hpp"
#include "dfir/firc3.hpp"
#include "dfir/ops.hpp"
#include "dfir/oracles.hpp"
#include "dfir/random.hpp"
#include "dfir/tensor_io.hpp"

namespace dfir::tools {
namespace {

// Salts keep the demo input stream apart from the parameter stream.
constexpr std::uint64_t kInputSalt = 0x696e707574ULL;  // "input"

template <typename F>
std::vector<double> time_runs(std::size_t runs, F&& body) {
  std::vector<double> samples;
  samples.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return samples;
}

BenchRecord record(std::string op, std::map<std::string, std::size_t> sizes, std::vector<double> samples) {
  BenchRecord r;
  r.op = std::move(op);
  r.sizes = std::move(sizes);
  r.runs = samples.size();
  r.median_ms = median(samples);
  r.samples_ms = std::move(samples);
  return r;
}

std::string format_ms(double ms) {
  std::ostringstream s;
  s.precision(4);
  s << ms << " ms";
  return s.str();
}

std::string shape_text(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + ")";
}

void require_rank4(const Tensor& x, const std::string& block) {
  if (x.rank() != 4) throw ShapeError("input", block + " demo expects a (B, C, H, W) input");
}

}  // namespace

SuiteReport run_verify(const RunConfig& config) {
  config.validate();
  std::vector<std::string> names;
  if (config.block == "all") {
    names = verify::suite_names();
  } else if (config.block == "anup") {
    names = {"dfpn"};
  } else {
    names = {config.block};
  }
  verify::RunOptions options;
  options.dtype = config.dtype;
  options.seeds = config.effective_seeds();
  options.tolerance = config.tolerance;
  options.grid = config.grid;
  options.threads = config.threads;

  SuiteReport report;
  report.command = "verify";
  report.config = config;
  for (const std::string& name : names) report.suites.push_back(verify::run_suite(name, options));
  return report;
}

SuiteReport run_bench(const RunConfig& config) {
  config.validate();
  const BenchSizes& b = config.bench;
  SuiteReport report;
  report.command = "bench";
  report.config = config;
  Rng rng(config.primary_seed());

  // Timings run one at a time whatever --threads says: concurrent repetitions
  // would contend for the same cores and distort the medians.
  for (std::size_t n : b.tokens) {
    const Tensor q = random_tensor({n, b.head_dim}, rng);
    const Tensor k = random_tensor({n, b.head_dim}, rng);
    const Tensor v = random_tensor({n, b.head_dim}, rng);
    const BenchRecord dense = record("dense_attention", {{"N", n}, {"d", b.head_dim}},
                                     time_runs(b.runs, [&] { oracle::dense_attention_reference(q, k, v); }));
    report.benchmarks.push_back(dense);
    for (std::size_t divisor : b.k_divisors) {
      const std::size_t top_k = n / divisor;
      const BenchRecord sparse = record("topk_attention", {{"N", n}, {"d", b.head_dim}, {"K", top_k}},
                                        time_runs(b.runs, [&] { topk_attention(q, k, v, top_k); }));
      report.benchmarks.push_back(sparse);
      const std::string label = "[N=" + std::to_string(n) + ",K=" + std::to_string(top_k) + "]";
      const std::string detail = "topk " + format_ms(sparse.median_ms) + " vs dense " + format_ms(dense.median_ms);
      if (top_k == n) {
        report.soft_checks.push_back({"topk_full_k_within_3x_dense" + label, sparse.median_ms <= 3.0 * dense.median_ms, detail});
      } else {
        report.soft_checks.push_back({"topk_faster_than_dense" + label, sparse.median_ms < dense.median_ms, detail});
      }
    }
  }

  for (std::size_t extent : b.conv_extents) {
    const std::size_t C = b.conv_channels, ks = b.kernel_size;
    const Tensor x = random_tensor({1, C, extent, extent}, rng);
    const Tensor taps = random_tensor({C, ks, ks}, rng);
    const Tensor weight = taps.reshaped({C, 1, ks, ks});
    const Conv2dOptions opts{C, PaddingMode::circular, 1};
    const std::map<std::string, std::size_t> sizes{{"C", C}, {"H", extent}, {"W", extent}, {"k", ks}};
    report.benchmarks.push_back(
        record("conv_direct", sizes, time_runs(b.runs, [&] { conv2d(x, weight, Tensor(), opts); })));
    report.benchmarks.push_back(record("conv_fft", sizes, time_runs(b.runs, [&] {
                                         const PeriodizedKernel kernel = periodize_kernel(taps, extent, extent);
                                         ComplexSpectrum X = fft2(x);
                                         for (std::size_t i = 0; i < X.numel(); ++i) X[i] *= kernel.otf[i];
                                         ifft2(X);
                                       })));
  }
  return report;
}

StageStats stage_stats(const std::string& stage, const Tensor& t) {
  StageStats s;
  s.stage = stage;
  s.shape = t.shape();
  if (t.numel() == 0) return s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -s.min;
  for (double v : t.data()) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = exact_mean(t.data());
  s.l1 = l1_norm(t);
  return s;
}

Shape demo_shape(const std::string& block) {
  if (block == "dfpn") return {1, 16, 16, 16};
  if (block == "anup") return {1, 16, 4, 4};
  return {1, 16, 8, 8};
}

Tensor demo_input(const RunConfig& config) {
  const Shape shape = config.shape.empty() ? demo_shape(config.block) : Shape(config.shape.begin(), config.shape.end());
  if (config.input == "random") return random_tensor(shape, derive_seed(config.primary_seed(), kInputSalt), -1.0, 1.0, config.dtype);
  if (config.input == "ones") return Tensor::full(shape, 1.0, config.dtype);
  Tensor t = io::read_tensor(config.input);
  if (!config.shape.empty() && t.shape() != shape) {
    throw ShapeError("input", "fixture " + config.input + " has shape " + shape_text(t.shape()) +
                                  " but the config asks for " + shape_text(shape));
  }
  return t.to(config.dtype);
}

DemoResult run_demo(const RunConfig& config, const Tensor& input) {
  DemoResult r;
  r.block = config.block;
  r.input = input;
  const std::string& block = config.block;
  const std::uint64_t seed = config.primary_seed();
  require_rank4(input, block);
  const std::size_t C = input.channels();
  r.stages.push_back(stage_stats("input", input));

  if (block == "dcfa") {
    DcfaConfig c;
    c.channels = C;
    c.seed = seed;
    c.validate();
    const ParamStore params = init_dcfa_params(c, seed).to(config.dtype);
    r.output = dcfa_block(input, c, params);
  } else if (block == "dfpn") {
    if (input.height() % 4 || input.width() % 4) {
      throw ShapeError("input", "dfpn demo builds a 3-level pyramid and needs H and W divisible by 4");
    }
    DfpnConfig c;
    c.channels = {C, C, C};
    c.validate();
    PyramidLevels pyramid{{input, avg_pool(input, 2), avg_pool(input, 4)}};
    const ParamStore params = init_dfpn_params(c, seed).to(config.dtype);
    const PyramidLevels fused = dfpn_fuse(pyramid, c, params);
    for (std::size_t i = 0; i < fused.size(); ++i) {
      r.stages.push_back(stage_stats("level" + std::to_string(i) + ".in", pyramid.levels[i]));
      r.stages.push_back(stage_stats("level" + std::to_string(i) + ".out", fused.levels[i]));
    }
    r.output = fused.levels.front();
  } else if (block == "firc3") {
    FircConfig c;
    c.channels = C;
    c.validate();
    const ParamStore params = init_firc3_params(c, seed).to(config.dtype);
    r.output = firc3_block(input, c, params);
  } else if (block == "anup") {
    constexpr std::size_t s = 2;
    ParamStore params;
    Rng rng(seed);
    init_anup_params(params, "", C, C, rng);
    params = params.to(config.dtype);
    const Tensor low({input.batch(), C, s * input.height(), s * input.width()}, config.dtype);
    AnupStages stages;
    r.output = anup(input, low, s, params, "", &stages);
    r.stages.push_back(stage_stats("upsampled", stages.upsampled));
    r.stages.push_back(stage_stats("normalized", stages.normalized));
  } else {
    throw ConfigError("demo block must be one of dcfa, dfpn, firc3, anup");
  }
  r.stages.push_back(stage_stats("output", r.output));
  return r;
}

nlohmann::ordered_json to_json(const DemoResult& result) {
  nlohmann::ordered_json j;
  j["block"] = result.block;
  j["input_shape"] = result.input.shape();
  j["output_shape"] = result.output.shape();
  auto stages = nlohmann::ordered_json::array();
  for (const StageStats& s : result.stages) {
    stages.push_back({{"stage", s.stage}, {"shape", s.shape}, {"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"l1", s.l1}});
  }
  j["stages"] = std::move(stages);
  return j;
}

std::vector<std::filesystem::path> generate_fixtures(const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const std::string block : {"dcfa", "dfpn", "firc3", "anup"}) {
    RunConfig c = config;
    c.block = block;
    c.input = "random";
    c.shape.clear();
    const Tensor input = demo_input(c);
    const DemoResult result = run_demo(c, input);
    for (const auto& [suffix, tensor] : {std::pair{"_input.dfir", &input}, std::pair{"_output.dfir", &result.output}}) {
      written.push_back(dir / (block + suffix));
      io::write_tensor(*tensor, written.back());
    }
  }
  written.push_back(dir / "ones_2x2.dfir");
  io::write_tensor(Tensor::full({1, 1, 2, 2}, 1.0, config.dtype), written.back());
  return written;
}

}  // namespace dfir::tools
