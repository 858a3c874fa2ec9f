#include "dfir/params.hpp"

#include <cmath>

namespace dfir {

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("missing parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("missing parameter '" + name + "'");
  return it->second;
}

ParamStore ParamStore::to(DType dtype) const {
  ParamStore out;
  for (const auto& [name, value] : params_) out.params_.emplace(name, value.to(dtype));
  return out;
}

void ParamStore::zero_matching(const std::string& prefix, const std::string& needle) {
  for (auto& [name, value] : params_) {
    if (name.starts_with(prefix) && name.find(needle) != std::string::npos) {
      for (double& v : value.data()) v = 0.0;
    }
  }
}

void ParamStore::init_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                           std::size_t groups, Rng& rng, bool with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in / groups * k * k));
  set(name + ".weight", random_tensor({out, in / groups, k, k}, rng, -bound, bound));
  if (with_bias) set(name + ".bias", random_tensor({out}, rng, -bound, bound));
}

void ParamStore::init_affine(const std::string& name, std::size_t channels) {
  set(name + ".gain", Tensor::full({channels}, 1.0));
  set(name + ".shift", Tensor({channels}));
}

ad::Var Scope::param(const std::string& name) const {
  const std::string full = prefix_ + name;
  if (auto existing = tape_->find_parameter(full)) return *existing;
  return tape_->parameter(full, params_->get(full));
}

ad::Var scoped_conv(const Scope& scope, const std::string& name, const ad::Var& x,
                    const Conv2dOptions& options) {
  std::optional<ad::Var> bias;
  if (scope.has(name + ".bias")) bias = scope.param(name + ".bias");
  return ad::conv2d(x, scope.param(name + ".weight"), bias, options);
}

}  // namespace dfir
