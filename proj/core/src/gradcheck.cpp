#include "dfir/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dfir {

Tensor finite_diff(const std::function<double(const Tensor&)>& fn, const Tensor& at, double h) {
  if (!(h > 0)) throw Error("finite_diff: step h must be positive");
  Tensor grad(at.shape());
  Tensor probe = at;
  for (std::size_t i = 0; i < at.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = fn(probe);
    probe[i] = orig - h;
    const double down = fn(probe);
    probe[i] = orig;
    if (std::isnan(up) || std::isnan(down)) {
      throw NumericError("finite_diff", "finite_diff: function returned NaN at coordinate " +
                                            std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

GradReport compare_gradients(std::string op_name, std::string param_name, Tensor analytic,
                             Tensor numeric, double tolerance) {
  GradReport r;
  r.op_name = std::move(op_name);
  r.param_name = std::move(param_name);
  r.max_rel_err = max_rel_err(analytic, numeric);
  r.analytic = std::move(analytic);
  r.numeric = std::move(numeric);
  r.tolerance = tolerance;
  r.pass = r.max_rel_err <= tolerance;
  return r;
}

namespace {

double evaluate(const std::map<std::string, Tensor>& leaves, const LossBuilder& build) {
  ad::Tape tape;
  std::map<std::string, ad::Var> vars;
  for (const auto& [name, value] : leaves) vars.emplace(name, tape.parameter(name, value));
  const ad::Var loss = build(tape, vars);
  return loss.tensor()[0];
}

}  // namespace

std::vector<GradReport> check_gradients(const std::string& op_name,
                                        const std::map<std::string, Tensor>& leaves,
                                        const LossBuilder& build, double tolerance, double h,
                                        const std::vector<std::string>& check) {
  ad::Tape tape;
  std::map<std::string, ad::Var> vars;
  for (const auto& [name, value] : leaves) vars.emplace(name, tape.parameter(name, value));
  const ad::Gradients analytic = tape.backward(build(tape, vars));

  std::vector<GradReport> reports;
  for (const auto& [name, value] : leaves) {
    if (!check.empty() && std::find(check.begin(), check.end(), name) == check.end()) continue;
    std::map<std::string, Tensor> probe_leaves = leaves;
    auto fn = [&](const Tensor& probe) {
      probe_leaves[name] = probe;
      return evaluate(probe_leaves, build);
    };
    Tensor numeric = finite_diff(fn, value, h);
    reports.push_back(compare_gradients(op_name, name, analytic.at(name), std::move(numeric), tolerance));
  }
  return reports;
}

}  // namespace dfir
