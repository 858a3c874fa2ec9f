#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfir/fft.hpp"
#include "dfir/oracles.hpp"
#include "suites.hpp"

namespace dfir::verify {
namespace {

using detail::compare;
using detail::draw;
using detail::holds;
using detail::worst;

Shape planes(const GridPoint& p) { return {1, p.size("C", 2), p.size("H", 8), p.size("W", p.size("H", 8))}; }

double fft_roundtrip(CaseContext& ctx) {
  const Tensor x = draw(ctx, planes(ctx.point));
  return max_abs_diff(ifft2(fft2(x)), x);
}

double parseval(CaseContext& ctx) {
  const Tensor x = draw(ctx, planes(ctx.point));
  const ComplexSpectrum X = fft2(x);
  std::vector<double> space, freq;
  for (double v : x.data()) space.push_back(v * v);
  for (const auto& z : X.data()) freq.push_back(std::norm(z));
  const double lhs = exact_sum(space);
  const double rhs = exact_sum(freq) / static_cast<double>(x.height() * x.width());
  return std::abs(lhs - rhs) / std::max(lhs, 1e-300);
}

double fft_matches_dft(CaseContext& ctx) {
  const Tensor x = draw(ctx, planes(ctx.point)).to(DType::f64);
  const ComplexSpectrum fast = fft2(x);
  const ComplexSpectrum slow = oracle::naive_dft2(x);
  double peak = 1.0, diff = 0.0;
  for (std::size_t i = 0; i < fast.numel(); ++i) {
    peak = std::max(peak, std::abs(slow[i]));
    diff = std::max(diff, std::abs(fast[i] - slow[i]));
  }
  return diff / peak;
}

double conv_matches_reference(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 4), k = ctx.point.size("k", 3), g = ctx.point.size("groups", 1);
  const std::size_t O = ctx.point.size("O", C);
  const Tensor x = draw(ctx, {2, C, 7, 9});
  const Tensor w = draw(ctx, {O, C / g, k, k});
  const Tensor b = draw(ctx, {O});
  const Tensor want = oracle::conv2d_reference(x.to(DType::f64), w.to(DType::f64), b.to(DType::f64), g);
  return compare(conv2d(x, w, b, {.groups = g}), want, ctx.dtype);
}

double conv_delta_identity(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 3), H = ctx.point.size("H", 8), k = ctx.point.size("k", 3);
  const Tensor x = draw(ctx, {1, C, H, H});
  Tensor w({C, 1, k, k}, ctx.dtype);
  for (std::size_t c = 0; c < C; ++c) w[(c * k + k / 2) * k + k / 2] = 1.0;
  return max_abs_diff(conv2d(x, w, Tensor(), {.groups = C}), x);
}

double conv_circular_shift(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 3), H = ctx.point.size("H", 8), k = ctx.point.size("k", 3);
  const Tensor x = draw(ctx, {1, C, H, H});
  const Tensor w = draw(ctx, {C, C, k, k});
  const Conv2dOptions circ{.padding = PaddingMode::circular};
  const long dy = static_cast<long>(ctx.rng.next() % 5), dx = static_cast<long>(ctx.rng.next() % 5);
  return max_abs_diff(conv2d(roll(x, dy, dx), w, Tensor(), circ), roll(conv2d(x, w, Tensor(), circ), dy, dx));
}

double softmax_rows(CaseContext& ctx) {
  const std::size_t rows = 6, cols = ctx.point.size("N", 12), keep_n = ctx.point.size("K", 4);
  const Tensor logits = draw(ctx, {rows, cols}, -4.0, 4.0);
  KeepSets keep(rows);
  for (auto& row : keep) {
    std::vector<std::size_t> all(cols);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < keep_n; ++i) std::swap(all[i], all[i + ctx.rng.next() % (cols - i)]);
    row.assign(all.begin(), all.begin() + static_cast<long>(keep_n));
  }
  const Tensor p = masked_softmax(logits, keep);
  double err = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const bool kept = std::find(keep[r].begin(), keep[r].end(), c) != keep[r].end();
      const double v = p[r * cols + c];
      if (!kept && v != 0.0) return INFINITY;
      total += v;
    }
    err = std::max(err, std::abs(total - 1.0));
  }
  return err;
}

double shuffle_sorted(CaseContext& ctx) {
  const Tensor x = draw(ctx, planes(ctx.point));
  const Tensor y = channel_shuffle(x);
  std::vector<double> a(x.data().begin(), x.data().end()), b(y.data().begin(), y.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return holds(a == b);
}

double shuffle_involution(CaseContext& ctx) {
  const Tensor x = draw(ctx, {1, 4, ctx.point.size("H", 4), ctx.point.size("H", 4)});
  return holds(channel_shuffle(channel_shuffle(x)) == x);
}

double nearest_l1(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 2);
  const Tensor x = draw(ctx, planes(ctx.point)).to(DType::f64);
  // s^2 copies of every magnitude, summed exactly: the real number s^2 ||x||_1.
  std::vector<double> copies;
  for (double v : x.data()) copies.insert(copies.end(), s * s, std::abs(v));
  return std::abs(l1_norm(nearest_upsample(x, s)) - exact_sum(copies));
}

double zero_insert_l1(CaseContext& ctx) {
  const Tensor x = draw(ctx, planes(ctx.point)).to(DType::f64);
  return std::abs(l1_norm(zero_insert_upsample(x, ctx.point.size("s", 2))) - l1_norm(x));
}

ComplexSpectrum random_spectrum(CaseContext& ctx, const Shape& shape) {
  ComplexSpectrum z(shape);
  for (auto& v : z.data()) v = {ctx.rng.uniform(-1, 1), ctx.rng.uniform(-1, 1)};
  return z;
}

double avg_repeat_identity(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 2);
  const ComplexSpectrum z = random_spectrum(ctx, planes(ctx.point));
  const ComplexSpectrum back = block_avg_spectrum(repeat_spectrum(z, s), s);
  return holds(std::equal(z.data().begin(), z.data().end(), back.data().begin()));
}

double repeat_avg_idempotent(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 2);
  Shape shape = planes(ctx.point);
  shape[2] *= s;
  shape[3] *= s;
  const ComplexSpectrum z = random_spectrum(ctx, shape);
  const ComplexSpectrum once = repeat_spectrum(block_avg_spectrum(z, s), s);
  const ComplexSpectrum twice = repeat_spectrum(block_avg_spectrum(once, s), s);
  return holds(std::equal(once.data().begin(), once.data().end(), twice.data().begin()));
}

double group_norm_stats(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 8), G = ctx.point.size("G", 4);
  const Tensor x = draw(ctx, {2, C, 5, 6}, -3.0, 5.0).to(DType::f64);
  const NormSpec spec = make_group_norm(C, G, 1e-5);
  const Tensor y = group_norm(x, spec);
  const std::size_t per = (C / G) * 30;
  double err = 0.0;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t g = 0; g < G; ++g) {
      const std::size_t base = (b * C + g * (C / G)) * 30;
      double mx = 0.0, vx = 0.0, my = 0.0, vy = 0.0;
      for (std::size_t i = 0; i < per; ++i) mx += x[base + i], my += y[base + i];
      mx /= per, my /= per;
      for (std::size_t i = 0; i < per; ++i) {
        vx += (x[base + i] - mx) * (x[base + i] - mx);
        vy += (y[base + i] - my) * (y[base + i] - my);
      }
      vx /= per, vy /= per;
      err = std::max({err, std::abs(my), std::abs(vy - vx / (vx + 1e-5))});
    }
  return err;
}

// Gradient checks run in f64 whatever the suite dtype.
std::vector<GradReport> grad_case(CaseContext& ctx, const std::string& op, std::map<std::string, Tensor> leaves,
                                  const Shape& out_shape,
                                  const std::function<ad::Var(ad::Tape&, const std::map<std::string, ad::Var>&)>& f) {
  const Tensor weights = random_tensor(out_shape, ctx.rng);
  return check_gradients(op, leaves, [&](ad::Tape& t, const std::map<std::string, ad::Var>& v) {
    return ad::weighted_sum(f(t, v), weights);
  });
}

double grad_gelu(CaseContext& ctx) {
  const Shape shape{2, 3, 4, 5};
  return worst(grad_case(ctx, "gelu", {{"x", random_tensor(shape, ctx.rng, -3, 3)}}, shape,
                         [](ad::Tape&, const auto& v) { return ad::gelu(v.at("x")); }));
}

double grad_conv(CaseContext& ctx) {
  const std::size_t C = 4, O = 6, k = ctx.point.size("k", 3), g = ctx.point.size("groups", 1);
  const Conv2dOptions opt{.groups = g, .padding = ctx.point.get("circular", 0) ? PaddingMode::circular : PaddingMode::zero};
  return worst(grad_case(ctx, "conv2d",
                         {{"x", random_tensor({2, C, 5, 5}, ctx.rng)},
                          {"w", random_tensor({O, C / g, k, k}, ctx.rng)},
                          {"b", random_tensor({O}, ctx.rng)}},
                         {2, O, 5, 5},
                         [&](ad::Tape&, const auto& v) { return ad::conv2d(v.at("x"), v.at("w"), v.at("b"), opt); }));
}

double grad_group_norm(CaseContext& ctx) {
  const std::size_t C = 6, G = ctx.point.size("G", 3);
  return worst(grad_case(ctx, "group_norm",
                         {{"x", random_tensor({2, C, 3, 4}, ctx.rng, -2, 2)},
                          {"gain", random_tensor({C}, ctx.rng, 0.5, 1.5)},
                          {"shift", random_tensor({C}, ctx.rng)}},
                         {2, C, 3, 4},
                         [&](ad::Tape&, const auto& v) {
                           return ad::group_norm(v.at("x"), v.at("gain"), v.at("shift"), G, 1e-5);
                         }));
}

double grad_masked_softmax(CaseContext& ctx) {
  const std::size_t rows = 5, cols = 9, K = ctx.point.size("K", 3);
  KeepSets keep(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < K; ++i) keep[r].push_back((r * 2 + i * 3) % cols);
  for (auto& row : keep) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return worst(grad_case(ctx, "masked_softmax", {{"x", random_tensor({rows, cols}, ctx.rng, -2, 2)}}, {rows, cols},
                         [&](ad::Tape&, const auto& v) { return ad::masked_softmax(v.at("x"), keep); }));
}

double grad_layout_ops(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 2);
  return worst(grad_case(ctx, "layout", {{"x", random_tensor({1, 4, 3, 3}, ctx.rng)}}, {1, 8, 3 * s, 3 * s},
                         [&](ad::Tape&, const auto& v) {
                           const ad::Var up = ad::channel_shuffle(ad::nearest_upsample(v.at("x"), s));
                           return ad::concat_channels({up, ad::zero_insert_upsample(ad::sigmoid(v.at("x")), s)});
                         }));
}

double grad_spectral_ops(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 2), n = 4 * s;
  return worst(grad_case(ctx, "spectral",
                         {{"x", random_tensor({1, 2, n, n}, ctx.rng)},
                          {"y", random_tensor({1, 2, n, n}, ctx.rng)},
                          {"e", random_tensor({2}, ctx.rng, 1.0, 2.0)}},
                         {1, 2, n, n}, [&](ad::Tape&, const auto& v) {
                           const ad::Var X = ad::fft2(v.at("x"));
                           const ad::Var Y = ad::fft2(v.at("y"));
                           const ad::Var ratio =
                               ad::c_div(ad::c_mul(X, ad::c_conj(Y)), ad::c_add_channel(ad::c_abs2(Y), v.at("e")));
                           const ad::Var folded = ad::repeat_spectrum(ad::block_avg_spectrum(ratio, s), s);
                           return ad::ifft2_real(ad::c_div_channel(ad::c_sub(ad::c_add(folded, X), Y), v.at("e")));
                         }));
}

double fft_chain_gradient(CaseContext& ctx) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", random_tensor(planes(ctx.point), ctx.rng));
  const ad::Gradients g = tape.backward(ad::sum(ad::ifft2_real(ad::fft2(x))));
  double err = 0.0;
  for (double v : g.at("x").data()) err = std::max(err, std::abs(v - 1.0));
  return err;
}

double gradient_linearity(CaseContext& ctx) {
  const Tensor x0 = random_tensor({1, 3, 4, 4}, ctx.rng);
  const Tensor w1 = random_tensor({1, 3, 4, 4}, ctx.rng), w2 = random_tensor({1, 3, 4, 4}, ctx.rng);
  const double a = ctx.rng.uniform(-2, 2), b = ctx.rng.uniform(-2, 2);
  auto grad = [&](double ca, double cb) {
    ad::Tape tape;
    const ad::Var x = tape.parameter("x", x0);
    const ad::Var f = ad::weighted_sum(ad::gelu(x), w1);
    const ad::Var g = ad::weighted_sum(ad::sigmoid(x), w2);
    return tape.backward(ad::add(ad::scale(f, ca), ad::scale(g, cb))).at("x");
  };
  const Tensor combined = grad(a, b);
  const Tensor separate = add(scale(grad(1, 0), a), scale(grad(0, 1), b));
  return max_abs_diff(combined, separate);
}

GridPoint hw(long h, long w) { return {{"H", h}, {"W", w}}; }

}  // namespace

Suite make_core_suite() {
  using detail::grid;
  const Grid extents = grid(hw(8, 8), hw(12, 20), hw(16, 16), hw(32, 32), hw(64, 64));
  Suite s{"core", {}};
  s.properties = {
      {"fft_roundtrip", extents, 1e-10, 1e-5, fft_roundtrip},
      {"fft_parseval", extents, 1e-9, 1e-5, parseval},
      {"fft_matches_naive_dft", grid(hw(8, 8), hw(6, 10), hw(16, 16)), 1e-10, 1e-5, fft_matches_dft},
      {"conv2d_matches_reference",
       grid(GridPoint{{"C", 4}, {"k", 1}}, GridPoint{{"C", 4}, {"k", 3}}, GridPoint{{"C", 4}, {"k", 3}, {"groups", 2}},
            GridPoint{{"C", 6}, {"k", 5}, {"groups", 3}}, GridPoint{{"C", 8}, {"k", 3}, {"groups", 8}},
            GridPoint{{"C", 4}, {"k", 3}, {"O", 2}}),
       1e-9, 1e-5, conv_matches_reference},
      {"conv2d_delta_identity", grid(GridPoint{{"C", 3}, {"k", 1}}, GridPoint{{"C", 3}, {"k", 3}},
                                     GridPoint{{"C", 5}, {"k", 5}, {"H", 6}, {"W", 9}}),
       0.0, 0.0, conv_delta_identity},
      {"conv2d_circular_shift_equivariance", grid(GridPoint{{"k", 3}}, GridPoint{{"k", 5}, {"H", 10}}), 1e-10, 1e-5,
       conv_circular_shift},
      {"masked_softmax_rows", grid(GridPoint{{"N", 12}, {"K", 1}}, GridPoint{{"N", 12}, {"K", 4}},
                                   GridPoint{{"N", 12}, {"K", 12}}),
       1e-12, 1e-6, softmax_rows},
      {"channel_shuffle_sorted_values", grid(GridPoint{{"C", 2}}, GridPoint{{"C", 4}}, GridPoint{{"C", 16}}), 0.0, 0.0,
       shuffle_sorted},
      {"channel_shuffle_c4_involution", grid(GridPoint{{"H", 3}}), 0.0, 0.0, shuffle_involution},
      {"nearest_upsample_l1_scaling", grid(GridPoint{{"s", 1}}, GridPoint{{"s", 2}}, GridPoint{{"s", 3}}, GridPoint{{"s", 4}}),
       0.0, 0.0, nearest_l1},
      {"zero_insert_l1_preserved", grid(GridPoint{{"s", 2}}, GridPoint{{"s", 3}}), 0.0, 0.0, zero_insert_l1},
      {"block_avg_repeat_identity", grid(GridPoint{{"s", 2}}, GridPoint{{"s", 3}}, GridPoint{{"s", 4}}), 0.0, 0.0,
       avg_repeat_identity},
      {"repeat_avg_idempotent", grid(GridPoint{{"s", 2}}, GridPoint{{"s", 3}}), 0.0, 0.0, repeat_avg_idempotent},
      {"group_norm_statistics", grid(GridPoint{{"C", 8}, {"G", 4}}, GridPoint{{"C", 6}, {"G", 1}}), 1e-8, 1e-4,
       group_norm_stats},
      {"gradient_gelu", grid(GridPoint{}), 1e-5, 1e-5, grad_gelu},
      {"gradient_conv2d", grid(GridPoint{{"k", 1}}, GridPoint{{"k", 3}, {"groups", 2}}, GridPoint{{"k", 3}, {"circular", 1}}),
       1e-5, 1e-5, grad_conv},
      {"gradient_group_norm", grid(GridPoint{{"G", 3}}, GridPoint{{"G", 1}}), 1e-5, 1e-5, grad_group_norm},
      {"gradient_masked_softmax", grid(GridPoint{{"K", 1}}, GridPoint{{"K", 3}}), 1e-5, 1e-5, grad_masked_softmax},
      {"gradient_layout_ops", grid(GridPoint{{"s", 2}}), 1e-5, 1e-5, grad_layout_ops},
      {"gradient_spectral_ops", grid(GridPoint{{"s", 1}}, GridPoint{{"s", 2}}), 1e-5, 1e-5, grad_spectral_ops},
      {"fft_chain_gradient_ones", grid(hw(8, 8)), 1e-10, 1e-10, fft_chain_gradient},
      {"gradient_linearity", grid(GridPoint{}), 1e-10, 1e-10, gradient_linearity},
  };
  return s;
}

}  // namespace dfir::verify
