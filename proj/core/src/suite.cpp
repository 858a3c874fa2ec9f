#include "dfir/suite.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "suites.hpp"

namespace dfir::verify {
namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

CaseResult run_one(const PropertyCase& c, DType dtype) {
  CaseResult r;
  r.name = c.name;
  r.seed = c.seed;
  r.tolerance = c.tolerance;
  Rng rng(derive_seed(c.seed, fnv1a(c.name)));
  CaseContext ctx{c.seed, dtype, c.point, rng};
  const auto start = std::chrono::steady_clock::now();
  try {
    r.max_rel_err = c.property->measure(ctx);
    const bool within = std::isfinite(r.max_rel_err) && r.max_rel_err <= c.tolerance;
    r.status = within ? CaseStatus::pass : CaseStatus::fail;
    if (!within) {
      char text[96];
      std::snprintf(text, sizeof text, "error %.3e exceeds tolerance %.3e", r.max_rel_err, c.tolerance);
      r.message = text;
    }
  } catch (const std::exception& e) {
    r.status = CaseStatus::error;
    r.max_rel_err = std::nan("");
    r.message = e.what();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

std::string_view status_name(CaseStatus s) {
  switch (s) {
    case CaseStatus::pass: return "pass";
    case CaseStatus::fail: return "fail";
    case CaseStatus::error: return "error";
  }
  return "error";
}

long GridPoint::get(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::size_t GridPoint::size(const std::string& key, std::size_t fallback) const {
  const long v = get(key, static_cast<long>(fallback));
  if (v < 0) throw Error("grid parameter " + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

std::string GridPoint::label() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (!out.empty()) out += ',';
    out += k + "=" + std::to_string(v);
  }
  return out;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"core", "dcfa", "dfpn", "firc3"};
  return names;
}

const Suite& find_suite(const std::string& name) {
  static const std::vector<Suite> suites{make_core_suite(), make_dcfa_suite(), make_dfpn_suite(), make_firc3_suite()};
  for (const Suite& s : suites) {
    if (s.name == name) return s;
  }
  throw Error("unknown suite '" + name + "'");
}

std::vector<PropertyCase> expand(const Suite& suite, const RunOptions& options) {
  std::vector<PropertyCase> cases;
  for (const Property& p : suite.properties) {
    const Grid& grid = options.grid ? *options.grid : p.grid;
    const double tol = options.tolerance.value_or(options.dtype == DType::f32 ? p.tolerance_f32 : p.tolerance_f64);
    for (const GridPoint& point : grid) {
      for (std::uint64_t seed : options.seeds) {
        const std::string label = point.label();
        std::string name = suite.name + "/" + p.name;
        if (!label.empty()) name += "[" + label + "]";
        name += "#" + std::to_string(seed);
        cases.push_back({std::move(name), seed, point, tol, &p});
      }
    }
  }
  return cases;
}

std::vector<CaseResult> run_cases(const std::vector<PropertyCase>& cases, DType dtype, std::size_t threads) {
  std::vector<CaseResult> results(cases.size());
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(cases.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < cases.size(); ++i) results[i] = run_one(cases[i], dtype);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cases.size(); i = next++) results[i] = run_one(cases[i], dtype);
    });
  }
  pool.clear();
  return results;
}

OracleReport run_suite(const Suite& suite, const RunOptions& options) {
  OracleReport report;
  report.suite = suite.name;
  report.cases = run_cases(expand(suite, options), options.dtype, options.threads);
  for (const CaseResult& r : report.cases) {
    switch (r.status) {
      case CaseStatus::pass: ++report.passed; break;
      case CaseStatus::fail: ++report.failed; break;
      case CaseStatus::error: ++report.errored; break;
    }
  }
  return report;
}

OracleReport run_suite(const std::string& name, const RunOptions& options) {
  return run_suite(find_suite(name), options);
}

}  // namespace dfir::verify
