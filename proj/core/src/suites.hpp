#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfir/gradcheck.hpp"
#include "dfir/ops.hpp"
#include "dfir/suite.hpp"

namespace dfir::verify {

Suite make_core_suite();
Suite make_dcfa_suite();
Suite make_dfpn_suite();
Suite make_firc3_suite();

// Helpers shared by the suite definitions.
namespace detail {

inline Tensor draw(CaseContext& ctx, const Shape& shape, double lo = -1.0, double hi = 1.0) {
  return random_tensor(shape, ctx.rng, lo, hi, ctx.dtype);
}

// Elementwise relative error in f64. Single precision uses the error relative
// to the reference's largest magnitude, since elementwise relative error is
// ill-conditioned for entries near zero at that precision.
inline double compare(const Tensor& got, const Tensor& want, DType dtype) {
  if (dtype == DType::f64) return max_rel_err(got, want);
  double peak = 1e-8;
  for (double v : want.data()) peak = std::max(peak, std::abs(v));
  return max_abs_diff(got, want) / peak;
}

inline double worst(const std::vector<GradReport>& reports) {
  double w = 0.0;
  for (const GradReport& r : reports) w = std::max(w, std::isnan(r.max_rel_err) ? INFINITY : r.max_rel_err);
  return w;
}

// 0 when the condition holds, 1 otherwise: the error metric of exact checks.
inline double holds(bool condition) { return condition ? 0.0 : 1.0; }

template <typename... Points>
Grid grid(Points... points) {
  return Grid{points...};
}

}  // namespace detail
}  // namespace dfir::verify
