#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dfir/tensor.hpp"
#include "dfir/tools/config.hpp"
#include "dfir/tools/report.hpp"

namespace dfir::tools {

// Runs the property suites the config selects.
SuiteReport run_verify(const RunConfig& config);

// Dense vs Top-K attention across the token sweep, direct vs FFT depthwise
// circular convolution across extents.
SuiteReport run_bench(const RunConfig& config);

struct StageStats {
  std::string stage;
  Shape shape;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double l1 = 0.0;
};
StageStats stage_stats(const std::string& stage, const Tensor& t);

struct DemoResult {
  std::string block;
  Tensor input;
  Tensor output;
  std::vector<StageStats> stages;
};

// Default demo input extents per block.
Shape demo_shape(const std::string& block);
// Input named by config.input: "random", "ones" or a fixture path. Throws
// ShapeError when a fixture disagrees with an explicitly configured shape.
Tensor demo_input(const RunConfig& config);
// One forward pass of config.block on `input` with parameters seeded from config.seed.
DemoResult run_demo(const RunConfig& config, const Tensor& input);
nlohmann::ordered_json to_json(const DemoResult& result);

// Writes <block>_input.dfir and <block>_output.dfir for every demo block, plus
// ones_2x2.dfir, into `dir`. Returns the written paths.
std::vector<std::filesystem::path> generate_fixtures(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace dfir::tools
