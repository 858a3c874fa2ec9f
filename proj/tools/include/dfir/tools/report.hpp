#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfir/suite.hpp"
#include "dfir/tools/config.hpp"

namespace dfir::tools {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct BenchRecord {
  std::string op;
  std::map<std::string, std::size_t> sizes;
  double median_ms = 0.0;
  std::size_t runs = 0;
  std::vector<double> samples_ms;
};

// Informational comparison recorded by `bench`; never affects the exit status.
struct SoftCheck {
  std::string name;
  bool holds = false;
  std::string detail;
};

struct SuiteReport {
  std::string command;
  RunConfig config;
  std::vector<verify::OracleReport> suites;
  std::vector<BenchRecord> benchmarks;
  std::vector<SoftCheck> soft_checks;

  std::size_t passed() const;
  std::size_t failed() const;
  std::size_t errored() const;
  bool ok() const { return failed() == 0 && errored() == 0; }
};

double median(std::vector<double> samples);

nlohmann::ordered_json to_json(const SuiteReport& report);
// Writes to a sibling temporary first so a failed run never leaves a partial report.
void write_report(const SuiteReport& report, const std::filesystem::path& path);

}  // namespace dfir::tools
