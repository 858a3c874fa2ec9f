#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dfir/autodiff.hpp"

namespace dfir {

// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h for every
// coordinate i of `at`. Throws NumericError if fn returns NaN.
Tensor finite_diff(const std::function<double(const Tensor&)>& fn, const Tensor& at, double h);

struct GradReport {
  std::string op_name;
  std::string param_name;
  Tensor analytic;
  Tensor numeric;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

GradReport compare_gradients(std::string op_name, std::string param_name, Tensor analytic,
                             Tensor numeric, double tolerance);

// Builds a scalar loss on a tape from named leaves. The same builder drives
// both the analytic (tape) and the numeric (re-evaluation) gradient.
using LossBuilder = std::function<ad::Var(ad::Tape&, const std::map<std::string, ad::Var>&)>;

// Checks d loss / d leaf for every entry of `leaves` whose name is in `check`
// (all leaves when `check` is empty).
std::vector<GradReport> check_gradients(const std::string& op_name,
                                        const std::map<std::string, Tensor>& leaves,
                                        const LossBuilder& build, double tolerance = 1e-5,
                                        double h = 1e-6, const std::vector<std::string>& check = {});

}  // namespace dfir
