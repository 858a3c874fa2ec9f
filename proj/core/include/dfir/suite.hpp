#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfir/random.hpp"
#include "dfir/tensor.hpp"

// Property-suite runner used by the CLI `verify` command and the test binaries.
namespace dfir::verify {

enum class CaseStatus { pass, fail, error };
std::string_view status_name(CaseStatus s);

// One point of a shape grid: named integer parameters ("C", "H", "k", ...).
class GridPoint {
 public:
  GridPoint() = default;
  GridPoint(std::initializer_list<std::pair<const std::string, long>> values) : values_(values) {}

  long get(const std::string& key, long fallback) const;
  std::size_t size(const std::string& key, std::size_t fallback) const;
  void set(const std::string& key, long value) { values_[key] = value; }
  const std::map<std::string, long>& values() const noexcept { return values_; }
  // "C=8,H=16"; empty for a point without parameters.
  std::string label() const;

 private:
  std::map<std::string, long> values_;
};
using Grid = std::vector<GridPoint>;

struct CaseContext {
  std::uint64_t seed;
  DType dtype;
  const GridPoint& point;
  Rng& rng;  // stream derived from (seed, property, grid point)
};

// A checkable claim. `measure` returns the error metric the tolerance bounds;
// a case passes when that metric is finite and <= tolerance. Exact properties
// use tolerance 0.
struct Property {
  std::string name;
  Grid grid;
  double tolerance_f64 = 0.0;
  double tolerance_f32 = 0.0;
  std::function<double(CaseContext&)> measure;
};

struct Suite {
  std::string name;
  std::vector<Property> properties;
};

// A concrete (property, grid point, seed) triple.
struct PropertyCase {
  std::string name;
  std::uint64_t seed = 0;
  GridPoint point;
  double tolerance = 0.0;
  const Property* property = nullptr;
};

struct CaseResult {
  std::string name;
  std::uint64_t seed = 0;
  CaseStatus status = CaseStatus::error;
  double max_rel_err = 0.0;  // NaN when the case errored
  double tolerance = 0.0;
  double wall_ms = 0.0;
  std::string message;
};

struct OracleReport {
  std::string suite;
  std::vector<CaseResult> cases;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t errored = 0;

  bool ok() const noexcept { return failed == 0 && errored == 0; }
};

struct RunOptions {
  DType dtype = DType::f64;
  std::vector<std::uint64_t> seeds{0};
  std::optional<double> tolerance;  // replaces every property's tolerance
  std::optional<Grid> grid;         // replaces every property's default grid
  std::size_t threads = 1;
};

// Registered suites, in the order `all` runs them.
const std::vector<std::string>& suite_names();
// Throws Error for an unknown name.
const Suite& find_suite(const std::string& name);

std::vector<PropertyCase> expand(const Suite& suite, const RunOptions& options);
// Runs every case; results keep the input order whatever the thread count.
// Never throws for a failing or erroring case.
std::vector<CaseResult> run_cases(const std::vector<PropertyCase>& cases, DType dtype, std::size_t threads);
OracleReport run_suite(const Suite& suite, const RunOptions& options);
OracleReport run_suite(const std::string& name, const RunOptions& options);

}  // namespace dfir::verify
