#include "dfir/tools/config.hpp"

#include <charconv>
#include <fstream>
#include <set>

namespace dfir::tools {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

std::vector<std::size_t> size_list(const json& obj, const char* key, const std::string& where) {
  const auto raw = field<std::vector<long long>>(obj, key, where);
  std::vector<std::size_t> out;
  for (long long v : raw) {
    if (v <= 0) throw ConfigError(where + "." + key + " entries must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError(what + ": '" + text + "' is not a non-negative integer");
  }
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    std::string part = text.substr(start, pos - start);
    const std::size_t first = part.find_first_not_of(" \t");
    part = first == std::string::npos ? "" : part.substr(first, part.find_last_not_of(" \t") - first + 1);
    parts.push_back(std::move(part));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::vector<std::uint64_t> RunConfig::effective_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

void RunConfig::validate() const {
  static const std::set<std::string> blocks{"all", "core", "dcfa", "dfpn", "firc3", "anup"};
  if (!blocks.contains(block)) throw ConfigError("block must be one of all, core, dcfa, dfpn, firc3, anup");
  if (tolerance && !(*tolerance >= 0)) throw ConfigError("tolerance must be non-negative");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (bench.runs < 1) throw ConfigError("bench.runs must be >= 1");
  if (bench.head_dim < 1) throw ConfigError("bench.head_dim must be >= 1");
  for (std::size_t n : bench.tokens) {
    for (std::size_t d : bench.k_divisors) {
      if (d > n) throw ConfigError("bench.k_divisors: N / divisor must be >= 1 (N=" + std::to_string(n) + ")");
    }
  }
  if (bench.kernel_size % 2 == 0) throw ConfigError("bench.kernel_size must be odd");
  for (std::size_t e : bench.conv_extents) {
    if (e < bench.kernel_size) throw ConfigError("bench.conv_extents must be >= bench.kernel_size");
  }
  if (!shape.empty() && shape.size() != 4) throw ConfigError("shape must have four extents (B, C, H, W)");
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc, {"block", "dtype", "seed", "seeds", "tolerance", "grid", "threads", "bench", "input", "shape", "out"},
                 "config");
  RunConfig c;
  if (doc.contains("block")) c.block = field<std::string>(doc, "block", "config");
  if (doc.contains("dtype")) {
    try {
      c.dtype = parse_dtype(field<std::string>(doc, "dtype", "config"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("config.dtype: ") + e.what());
    }
  }
  if (doc.contains("seed")) c.seed = field<std::uint64_t>(doc, "seed", "config");
  if (doc.contains("seeds")) c.seeds = field<std::vector<std::uint64_t>>(doc, "seeds", "config");
  if (doc.contains("tolerance") && !doc.at("tolerance").is_null()) c.tolerance = field<double>(doc, "tolerance", "config");
  if (doc.contains("threads")) c.threads = field<std::size_t>(doc, "threads", "config");
  if (doc.contains("input")) c.input = field<std::string>(doc, "input", "config");
  if (doc.contains("shape")) c.shape = size_list(doc, "shape", "config");
  if (doc.contains("out")) c.out = field<std::string>(doc, "out", "config");
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    if (!g.is_array()) throw ConfigError("config.grid must be an array of objects");
    verify::Grid grid;
    for (const json& point : g) {
      if (!point.is_object()) throw ConfigError("config.grid entries must be objects");
      verify::GridPoint p;
      for (const auto& [key, value] : point.items()) {
        if (!value.is_number_integer()) throw ConfigError("config.grid." + key + " must be an integer");
        p.set(key, value.get<long>());
      }
      grid.push_back(std::move(p));
    }
    c.grid = std::move(grid);
  }
  if (doc.contains("bench")) {
    const json& b = doc.at("bench");
    if (!b.is_object()) throw ConfigError("config.bench must be an object");
    reject_unknown(b, {"tokens", "k_divisors", "head_dim", "conv_extents", "conv_channels", "kernel_size", "runs"},
                   "config.bench");
    const std::string where = "config.bench";
    if (b.contains("tokens")) c.bench.tokens = size_list(b, "tokens", where);
    if (b.contains("k_divisors")) c.bench.k_divisors = size_list(b, "k_divisors", where);
    if (b.contains("head_dim")) c.bench.head_dim = field<std::size_t>(b, "head_dim", where);
    if (b.contains("conv_extents")) c.bench.conv_extents = size_list(b, "conv_extents", where);
    if (b.contains("conv_channels")) c.bench.conv_channels = field<std::size_t>(b, "conv_channels", where);
    if (b.contains("kernel_size")) c.bench.kernel_size = field<std::size_t>(b, "kernel_size", where);
    if (b.contains("runs")) c.bench.runs = field<std::size_t>(b, "runs", where);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["block"] = c.block;
  j["dtype"] = std::string(dtype_name(c.dtype));
  j["seeds"] = c.effective_seeds();
  j["tolerance"] = c.tolerance ? nlohmann::ordered_json(*c.tolerance) : nlohmann::ordered_json(nullptr);
  j["threads"] = c.threads;
  if (c.grid) {
    auto grid = nlohmann::ordered_json::array();
    for (const auto& p : *c.grid) grid.push_back(p.values());
    j["grid"] = grid;
  }
  j["bench"] = {{"tokens", c.bench.tokens},         {"k_divisors", c.bench.k_divisors},
                {"head_dim", c.bench.head_dim},     {"conv_extents", c.bench.conv_extents},
                {"conv_channels", c.bench.conv_channels}, {"kernel_size", c.bench.kernel_size},
                {"runs", c.bench.runs}};
  return j;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split(text, ',')) seeds.push_back(parse_u64(part, "seeds"));
  return seeds;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> shape;
  for (const std::string& part : split(text, ',')) {
    const std::uint64_t v = parse_u64(part, "shape");
    if (v == 0) throw ConfigError("shape extents must be positive");
    shape.push_back(static_cast<std::size_t>(v));
  }
  return shape;
}

}  // namespace dfir::tools
