#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfir/suite.hpp"

namespace dfir::tools {

// Invalid configuration or command-line input; maps to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct BenchSizes {
  std::vector<std::size_t> tokens{256, 1024, 4096};
  std::vector<std::size_t> k_divisors{16};  // sparse K = N / divisor
  std::size_t head_dim = 32;
  std::vector<std::size_t> conv_extents{16, 32, 64};
  std::size_t conv_channels = 8;
  std::size_t kernel_size = 5;
  std::size_t runs = 20;
};

struct RunConfig {
  std::string block = "all";
  DType dtype = DType::f64;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // empty: just `seed`
  std::optional<double> tolerance;
  std::optional<verify::Grid> grid;
  std::size_t threads = 1;
  BenchSizes bench;
  std::string input = "random";  // demo input: "random", "ones" or a fixture path
  std::vector<std::size_t> shape;
  std::optional<std::filesystem::path> out;

  std::vector<std::uint64_t> effective_seeds() const;
  // Seed for single-run commands (bench, demo): the first effective seed.
  std::uint64_t primary_seed() const { return effective_seeds().front(); }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Strict: unknown keys and mistyped values raise ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& config);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<std::size_t> parse_shape(const std::string& text);

}  // namespace dfir::tools
