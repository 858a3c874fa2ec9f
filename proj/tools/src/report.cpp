#include "dfir/tools/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dfir::tools {
namespace {

using nlohmann::ordered_json;

// JSON has no NaN or infinity; both become null.
ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

std::size_t SuiteReport::passed() const {
  std::size_t n = 0;
  for (const auto& s : suites) n += s.passed;
  return n;
}

std::size_t SuiteReport::failed() const {
  std::size_t n = 0;
  for (const auto& s : suites) n += s.failed;
  return n;
}

std::size_t SuiteReport::errored() const {
  std::size_t n = 0;
  for (const auto& s : suites) n += s.errored;
  return n;
}

double median(std::vector<double> samples) {
  if (samples.empty()) throw Error("median of an empty sample");
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = samples.size() / 2;
  return samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
}

ordered_json to_json(const SuiteReport& report) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["command"] = report.command;
  j["config"] = config_to_json(report.config);

  std::size_t total = 0;
  for (const auto& s : report.suites) total += s.cases.size();
  j["summary"] = {{"cases", total},
                  {"passed", report.passed()},
                  {"failed", report.failed()},
                  {"errored", report.errored()}};

  auto suites = ordered_json::array();
  auto cases = ordered_json::array();
  for (const auto& s : report.suites) {
    suites.push_back({{"name", s.suite},
                      {"cases", s.cases.size()},
                      {"passed", s.passed},
                      {"failed", s.failed},
                      {"errored", s.errored}});
    for (const auto& c : s.cases) {
      ordered_json row;
      row["name"] = c.name;
      row["status"] = std::string(verify::status_name(c.status));
      row["max_rel_err"] = number_or_null(c.max_rel_err);
      row["tolerance"] = c.tolerance;
      row["wall_ms"] = c.wall_ms;
      row["seed"] = c.seed;
      if (!c.message.empty()) row["message"] = c.message;
      cases.push_back(std::move(row));
    }
  }
  j["suites"] = std::move(suites);
  j["cases"] = std::move(cases);

  auto benches = ordered_json::array();
  for (const auto& b : report.benchmarks) {
    ordered_json sizes = ordered_json::object();
    for (const auto& [key, value] : b.sizes) sizes[key] = value;
    benches.push_back({{"op", b.op},
                       {"sizes", std::move(sizes)},
                       {"median_ms", b.median_ms},
                       {"runs", b.runs},
                       {"samples_ms", b.samples_ms}});
  }
  j["benchmarks"] = std::move(benches);

  if (!report.soft_checks.empty()) {
    auto checks = ordered_json::array();
    for (const auto& c : report.soft_checks) checks.push_back({{"name", c.name}, {"holds", c.holds}, {"detail", c.detail}});
    j["soft_checks"] = std::move(checks);
  }
  return j;
}

void write_report(const SuiteReport& report, const std::filesystem::path& path) {
  const std::string text = to_json(report).dump(2) + "\n";
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write report " + path.string());
    out << text;
    if (!out) throw Error("cannot write report " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dfir::tools
