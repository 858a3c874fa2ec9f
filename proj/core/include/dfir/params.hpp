#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dfir/autodiff.hpp"
#include "dfir/random.hpp"

namespace dfir {

// Named parameter tensors of a block, keyed by dotted path ("dafb0.sglu.gate.weight").
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  void set(const std::string& name, Tensor value) { params_[name] = std::move(value); }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return params_.contains(name); }
  const Map& all() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  // Copy with every tensor converted to `dtype`.
  ParamStore to(DType dtype) const;
  // Zeroes every parameter whose name starts with `prefix` and contains `needle`.
  void zero_matching(const std::string& prefix, const std::string& needle = "");

  // Conv weight (out, in/groups, k, k) drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  // plus a bias from the same range when `with_bias`.
  void init_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                 std::size_t groups, Rng& rng, bool with_bias = true);
  // Per-channel gain (ones) and shift (zeros).
  void init_affine(const std::string& name, std::size_t channels);

 private:
  Map params_;
};

// Binds a ParamStore to a tape under a name prefix. Parameters become tape
// leaves on first use, so gradients are available for every parameter touched.
class Scope {
 public:
  Scope(ad::Tape& tape, const ParamStore& params, std::string prefix = "")
      : tape_(&tape), params_(&params), prefix_(std::move(prefix)) {}

  ad::Var param(const std::string& name) const;
  bool has(const std::string& name) const { return params_->contains(prefix_ + name); }
  const Tensor& raw(const std::string& name) const { return params_->get(prefix_ + name); }
  Scope sub(const std::string& name) const { return Scope(*tape_, *params_, prefix_ + name + "."); }
  ad::Tape& tape() const { return *tape_; }
  const std::string& prefix() const noexcept { return prefix_; }

 private:
  ad::Tape* tape_;
  const ParamStore* params_;
  std::string prefix_;
};

// 1x1 / kxk convolution through the scope's "<name>.weight" and optional
// "<name>.bias" parameters.
ad::Var scoped_conv(const Scope& scope, const std::string& name, const ad::Var& x,
                    const Conv2dOptions& options = {});

}  // namespace dfir
