#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfir/dcfa.hpp"
#include "dfir/dfpn.hpp"
#include "dfir/fft.hpp"
#include "dfir/firc3.hpp"
#include "dfir/oracles.hpp"
#include "suites.hpp"

namespace dfir::verify {
namespace {

using detail::compare;
using detail::draw;
using detail::holds;
using detail::worst;

using Block = std::function<ad::Var(const Scope&, const ad::Var&)>;

Tensor forward(const ParamStore& params, const Tensor& x, const Block& block) {
  ad::Tape tape;
  return block(Scope(tape, params), tape.constant(x)).tensor();
}

// Gradient of a random linear functional of the block output with respect to
// the input and every parameter not under one of `skip`.
double block_gradients(CaseContext& ctx, const std::string& op, const ParamStore& params, const Tensor& x,
                       const Block& block, const std::vector<std::string>& skip = {}) {
  std::map<std::string, Tensor> leaves(params.all().begin(), params.all().end());
  leaves["input"] = x;
  std::vector<std::string> check;
  for (const auto& [name, value] : leaves) {
    const bool skipped = std::any_of(skip.begin(), skip.end(), [&](const std::string& p) {
      return name.find(p) != std::string::npos;
    });
    if (!skipped) check.push_back(name);
  }
  const Tensor weights = random_tensor(forward(params, x, block).shape(), ctx.rng);
  return worst(check_gradients(
      op, leaves,
      [&](ad::Tape& tape, const std::map<std::string, ad::Var>& v) {
        return ad::weighted_sum(block(Scope(tape, params), v.at("input")), weights);
      },
      1e-5, 1e-6, check));
}

// ---------------------------------------------------------------------------
// DCFA

Tensor token_matrix(const Tensor& x, std::size_t b, std::size_t c0, std::size_t d) {
  const std::size_t n = x.height() * x.width();
  Tensor out({n, d});
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t t = 0; t < n; ++t) out[t * d + c] = x[(b * x.channels() + c0 + c) * n + t];
  return out;
}

struct DksaParts {
  Tensor normed, q, k, v;
};

DksaParts dksa_parts(const Tensor& x, const ParamStore& params, const std::string& prefix, std::size_t groups) {
  const std::size_t half = x.channels() / 2;
  NormSpec spec = make_group_norm(half, groups);
  spec.gain = params.get(prefix + "norm.gain");
  spec.shift = params.get(prefix + "norm.shift");
  DksaParts p;
  p.normed = group_norm(slice_channels(x, 0, half), spec);
  auto proj = [&](const char* name) {
    return oracle::conv2d_reference(p.normed, params.get(prefix + name + ".weight"),
                                    params.get(prefix + name + ".bias"), 1);
  };
  p.q = proj("q");
  p.k = proj("k");
  p.v = proj("v");
  return p;
}

// Smallest gap between the K-th and (K+1)-th score over every query row.
double topk_margin(const DksaParts& p, std::size_t heads, std::size_t K) {
  const std::size_t d = p.q.channels() / heads, n = p.q.height() * p.q.width();
  if (K >= n) return INFINITY;
  double margin = INFINITY;
  std::vector<double> row(n);
  for (std::size_t b = 0; b < p.q.batch(); ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor q = token_matrix(p.q, b, h * d, d), k = token_matrix(p.k, b, h * d, d);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < d; ++c) acc += q[i * d + c] * k[j * d + c];
          row[j] = acc / std::sqrt(static_cast<double>(d));
        }
        std::nth_element(row.begin(), row.begin() + static_cast<long>(K), row.end(), std::greater<>());
        const double kth = *std::min_element(row.begin(), row.begin() + static_cast<long>(K));
        margin = std::min(margin, kth - row[K]);
      }
    }
  return margin;
}

double topk_dense_equivalence(CaseContext& ctx) {
  const std::size_t n = ctx.point.size("N", 16), d = ctx.point.size("d", 8);
  const Tensor q = draw(ctx, {n, d}), k = draw(ctx, {n, d}), v = draw(ctx, {n, d});
  const Tensor want = oracle::dense_attention_reference(q.to(DType::f64), k.to(DType::f64), v.to(DType::f64));
  return compare(topk_attention(q, k, v, n), want, ctx.dtype);
}

double dksa_dense_equivalence(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 8), H = ctx.point.size("H", 4), half = C / 2;
  const std::size_t heads = default_heads(half), d = half / heads, n = H * H;
  ParamStore params;
  init_dksa_params(params, "", C, ctx.rng);
  params.set("norm.gain", random_tensor({half}, ctx.rng, 0.5, 1.5));
  params.set("norm.shift", random_tensor({half}, ctx.rng, -0.5, 0.5));
  const Tensor x = random_tensor({2, C, H, H}, ctx.rng);
  const DksaOptions opt{.fixed_k = n};
  const Tensor got = dksa(x.to(ctx.dtype), params.to(ctx.dtype), opt);

  const DksaParts p = dksa_parts(x, params, "", default_num_groups(half));
  Tensor attn({2, half, H, H});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor o = oracle::dense_attention_reference(token_matrix(p.q, b, h * d, d), token_matrix(p.k, b, h * d, d),
                                                         token_matrix(p.v, b, h * d, d));
      for (std::size_t c = 0; c < d; ++c)
        for (std::size_t t = 0; t < n; ++t) attn[((b * half) + h * d + c) * n + t] = o[t * d + c];
    }
  const Tensor parts[] = {attn, slice_channels(x, half, half)};
  const Tensor want = oracle::conv2d_reference(concat_channels(parts), params.get("proj.weight"),
                                               params.get("proj.bias"), 1);
  return compare(got, want, ctx.dtype);
}

double topk_structure(CaseContext& ctx) {
  const std::size_t n = ctx.point.size("N", 16), d = ctx.point.size("d", 8), K = ctx.point.size("K", n / 4);
  const Tensor q = random_tensor({n, d}, ctx.rng), k = random_tensor({n, d}, ctx.rng), v = random_tensor({n, d}, ctx.rng);
  SparseAttnPlan plan;
  topk_attention(q, k, v, K, &plan, true);
  const Tensor dense = plan.dense_weights();

  SparseAttnPlan scaled;
  topk_attention(scale(q, 3.0), k, v, K, &scaled);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return plan.scores[i * n + a] > plan.scores[i * n + b]; });
    std::vector<std::uint32_t> top(order.begin(), order.begin() + static_cast<long>(K));
    std::sort(top.begin(), top.end());
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < n; ++j) nonzero += dense[i * n + j] != 0.0;
    const auto idx = plan.row_indices(i);
    if (nonzero != K || !std::equal(top.begin(), top.end(), idx.begin(), idx.end())) return 1.0;

    // Rows whose K-th and (K+1)-th scores lie within 1e-3 may legitimately
    // swap under rescaling roundoff; only the others must keep their set.
    const bool near_tie = K < n && plan.scores[i * n + order[K - 1]] - plan.scores[i * n + order[K]] < 1e-3;
    if (!near_tie && !std::equal(idx.begin(), idx.end(), scaled.row_indices(i).begin())) return 1.0;
  }
  return 0.0;
}

double dynamic_k_formula(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 8), H = ctx.point.size("H", 4), half = C / 2, n = H * H;
  ParamStore params;
  init_dksa_params(params, "", C, ctx.rng);
  // Spread the gate bias so K lands across its whole range.
  params.set("gate.conv2.bias", Tensor::full({1}, ctx.rng.uniform(-4, 4)));
  const Tensor x = random_tensor({3, C, H, H}, ctx.rng);
  DksaTrace trace;
  dksa(x, params, {}, "", &trace);

  const DksaParts p = dksa_parts(x, params, "", default_num_groups(half));
  Tensor hidden = oracle::conv2d_reference(p.normed, params.get("gate.conv1.weight"), params.get("gate.conv1.bias"), 1);
  for (double& v : hidden.data()) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  const Tensor logit = oracle::conv2d_reference(hidden, params.get("gate.conv2.weight"), params.get("gate.conv2.bias"), 1);
  for (std::size_t b = 0; b < 3; ++b) {
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) mean += logit[b * n + t];
    mean /= static_cast<double>(n);
    const double raw = std::floor(static_cast<double>(n) / (1.0 + std::exp(-mean)));
    const std::size_t want = static_cast<std::size_t>(std::clamp(raw, 1.0, static_cast<double>(n)));
    if (trace.k[b] != want || trace.k[b] < 1 || trace.k[b] > n) return 1.0;
  }
  return 0.0;
}

DcfaConfig dcfa_config(const GridPoint& p) {
  DcfaConfig config;
  config.channels = p.size("C", 16);
  config.stack_depth = p.size("n", 1);
  config.concat = p.get("final_only", 0) ? ConcatMode::final_only : ConcatMode::dense;
  return config;
}

double dcfa_shape(CaseContext& ctx) {
  const DcfaConfig config = dcfa_config(ctx.point);
  const std::size_t H = ctx.point.size("H", 8);
  const Tensor x = draw(ctx, {1, config.channels, H, H});
  const Tensor y = dcfa_block(x, config, init_dcfa_params(config, ctx.rng.next()).to(ctx.dtype));
  return holds(y.shape() == x.shape() && y.all_finite());
}

// cv2(Concat[F1, F2, F2, ...]) computed without the DAFB chain.
Tensor collapsed_dcfa(const Tensor& x, const DcfaConfig& config, const ParamStore& params) {
  const Tensor projected = conv2d(x, params.get("cv1.weight"), params.get("cv1.bias"));
  const std::size_t c = config.hidden_channels();
  std::vector<Tensor> parts{slice_channels(projected, 0, c), slice_channels(projected, c, c)};
  if (config.concat == ConcatMode::dense) {
    for (std::size_t i = 0; i < config.stack_depth; ++i) parts.push_back(parts[1]);
  }
  return conv2d(concat_channels(parts), params.get("cv2.weight"), params.get("cv2.bias"));
}

double dcfa_residual_collapse(CaseContext& ctx) {
  const DcfaConfig config = dcfa_config(ctx.point);
  ParamStore params = init_dcfa_params(config, ctx.rng.next());
  params.zero_matching("blocks.", "dw.weight");
  params.zero_matching("blocks.", "attn.proj.");
  params.zero_matching("blocks.", "ffn.out.");
  const Tensor x = draw(ctx, {2, config.channels, 6, 6}).to(DType::f64);
  return max_abs_diff(dcfa_block(x, config, params), collapsed_dcfa(x, config, params));
}

double dcfa_empty_chain(CaseContext& ctx) {
  DcfaConfig config = dcfa_config(ctx.point);
  config.stack_depth = 0;
  const ParamStore params = init_dcfa_params(config, ctx.rng.next());
  const Tensor x = random_tensor({1, config.channels, 5, 5}, ctx.rng);
  return max_abs_diff(dcfa_block(x, config, params), collapsed_dcfa(x, config, params));
}

double dcfa_determinism(CaseContext& ctx) {
  const DcfaConfig config = dcfa_config(ctx.point);
  const ParamStore params = init_dcfa_params(config, ctx.seed).to(ctx.dtype);
  const Tensor x = draw(ctx, {1, config.channels, 8, 8});
  return holds(dcfa_block(x, config, params) == dcfa_block(x, config, params));
}

double gradient_sglu(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 4);
  ParamStore params;
  init_sglu_params(params, "", C, ctx.rng);
  const Tensor x = random_tensor({1, C, 4, 4}, ctx.rng);
  return block_gradients(ctx, "sglu", params, x, [](const Scope& s, const ad::Var& v) { return sglu(s, v); });
}

double gradient_dksa(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 8), H = ctx.point.size("H", 4), half = C / 2;
  const std::size_t K = ctx.point.size("K", H * H);
  ParamStore params;
  Tensor x;
  for (int attempt = 0;; ++attempt) {
    params = ParamStore();
    init_dksa_params(params, "", C, ctx.rng);
    x = random_tensor({1, C, H, H}, ctx.rng);
    if (topk_margin(dksa_parts(x, params, "", default_num_groups(half)), default_heads(half), K) >= 1e-3) break;
    if (attempt == 50) throw Error("could not draw inputs without near-ties");
  }
  const DksaOptions opt{.fixed_k = K};
  // The key bias adds q_i . b_k to every logit of row i, which the softmax
  // cancels: its gradient is identically zero and a finite difference only
  // sees roundoff. dksa_key_bias_gradient_vanishes covers it instead.
  return block_gradients(ctx, "dksa", params, x, [&](const Scope& s, const ad::Var& v) { return dksa(s, v, opt); },
                         {"gate.", "k.bias"});
}

double key_bias_gradient(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 8), H = ctx.point.size("H", 4);
  ParamStore params;
  init_dksa_params(params, "", C, ctx.rng);
  const Tensor x = random_tensor({1, C, H, H}, ctx.rng);
  const DksaOptions opt{.fixed_k = ctx.point.size("K", H * H)};
  ad::Tape tape;
  const ad::Var out = dksa(Scope(tape, params), tape.constant(x), opt);
  const ad::Gradients g = tape.backward(ad::weighted_sum(out, random_tensor(out.tensor().shape(), ctx.rng)));
  double bias = 0.0, scale = 0.0;
  for (double v : g.at("k.bias").data()) bias = std::max(bias, std::abs(v));
  for (double v : g.at("q.bias").data()) scale = std::max(scale, std::abs(v));
  return bias / scale;
}

double gradient_dafb(CaseContext& ctx) {
  const std::size_t C = 4, H = 3;
  ParamStore params;
  init_dafb_params(params, "", C, ctx.rng);
  const Tensor x = random_tensor({1, C, H, H}, ctx.rng);
  const DksaOptions attn{.fixed_k = H * H};
  return block_gradients(ctx, "dafb", params, x,
                         [&](const Scope& s, const ad::Var& v) { return dafb(s, v, attn, {}); },
                         {"gate.", "k.bias"});
}

// ---------------------------------------------------------------------------
// DFPN

double amplitude_law(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 2), H = ctx.point.size("H", 4);
  const Tensor f = random_tensor({1, ctx.point.size("C", 3), H, H}, ctx.rng);
  return std::abs(l1_norm(amplitude_normalize(f, s)) - l1_norm(f));
}

// Every normalized entry is within a few ulp of x / s^2.
double amplitude_elementwise(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 3);
  const Tensor f = random_tensor({1, 3, 4, 4}, ctx.rng);
  const Tensor norm = amplitude_normalize(f, s);
  Tensor want = nearest_upsample(f, s);
  for (double& v : want.data()) v /= static_cast<double>(s * s);
  return max_rel_err(norm, want);
}

double dpsc_permutation(CaseContext& ctx) {
  const std::size_t C = ctx.point.size("C", 8), half = C / 2;
  const bool cascaded = !ctx.point.get("from_input", 0);
  const DpscPath2 path2 = cascaded ? DpscPath2::cascaded : DpscPath2::from_input;
  ParamStore params;
  init_dpsc_params(params, "", C, path2, ctx.rng);
  const Tensor x = random_tensor({1, C, 6, 6}, ctx.rng);
  const Tensor y = dpsc(x, params, path2);

  const Tensor semantic = sigmoid(conv2d(x, params.get("std.weight"), params.get("std.bias")));
  const Tensor detail_in = cascaded ? conv2d(semantic, params.get("conv.weight"), params.get("conv.bias"))
                                    : gelu(conv2d(x, params.get("pw.weight"), params.get("pw.bias")));
  const Tensor detail = gelu(conv2d(detail_in, params.get("dw.weight"), params.get("dw.bias"), {.groups = half}));
  const Tensor parts[] = {semantic, detail};
  const Tensor pre = concat_channels(parts);
  std::vector<double> a(pre.data().begin(), pre.data().end()), b(y.data().begin(), y.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return holds(a == b && y == channel_shuffle(pre));
}

DfpnConfig dfpn_config(const GridPoint& p) {
  DfpnConfig config;
  config.scale = p.size("s", 2);
  config.channels.assign(p.size("L", 2), p.size("C", 8));
  if (p.get("from_input", 0)) config.path2 = DpscPath2::from_input;
  return config;
}

PyramidLevels random_pyramid(CaseContext& ctx, const DfpnConfig& config, std::size_t H) {
  PyramidLevels pyr;
  for (std::size_t i = 0; i < config.channels.size(); ++i) {
    pyr.levels.push_back(draw(ctx, {1, config.channels[i], H, H}));
    H /= config.scale;
  }
  return pyr;
}

double dfpn_shape(CaseContext& ctx) {
  const DfpnConfig config = dfpn_config(ctx.point);
  const PyramidLevels pyr = random_pyramid(ctx, config, ctx.point.size("H", 16));
  FuseTrace trace;
  const PyramidLevels out = dfpn_fuse(pyr, config, init_dfpn_params(config, ctx.rng.next()).to(ctx.dtype), &trace);
  bool ok = out.size() == pyr.size() && trace.anup_calls == pyr.size() - 1 && trace.dpsc_calls == pyr.size();
  for (std::size_t i = 0; ok && i < out.size(); ++i) ok = out.levels[i].shape() == pyr.levels[i].shape();
  return holds(ok);
}

double dfpn_single_level(CaseContext& ctx) {
  DfpnConfig config = dfpn_config(ctx.point);
  config.channels.resize(1);
  const ParamStore params = init_dfpn_params(config, ctx.rng.next());
  const PyramidLevels pyr = random_pyramid(ctx, config, 8);
  return holds(dfpn_fuse(pyr, config, params).levels[0] == dpsc(pyr.levels[0], params, config.path2, "dpsc.0."));
}

// A zero pyramid with zero biases stays zero through ANUP; DPSC's sigmoid
// path then emits exactly 0.5 and the detail path whatever 0.5 maps to.
double dfpn_zero_pyramid(CaseContext& ctx) {
  const DfpnConfig config = dfpn_config(ctx.point);
  ParamStore params = init_dfpn_params(config, ctx.rng.next());
  params.zero_matching("", ".bias");
  PyramidLevels pyr;
  std::size_t H = 8;
  for (std::size_t c : config.channels) {
    pyr.levels.push_back(Tensor({1, c, H, H}));
    H /= config.scale;
  }
  for (std::size_t i = 0; i + 1 < pyr.size(); ++i) {
    const Tensor fused = anup(pyr.levels[i + 1], pyr.levels[i], config.scale, params, "anup." + std::to_string(i) + ".");
    if (l1_norm(fused) != 0.0) return 1.0;
  }
  const PyramidLevels out = dfpn_fuse(pyr, config, params);
  for (const Tensor& level : out.levels)
    for (std::size_t c = 0; c < level.channels(); c += 2)
      for (std::size_t t = 0; t < level.height() * level.width(); ++t) {
        if (level[c * level.height() * level.width() + t] != 0.5) return 1.0;
      }
  return 0.0;
}

double gradient_anup(CaseContext& ctx) {
  const std::size_t s = ctx.point.size("s", 2), Ch = 3, Cl = 2;
  ParamStore params;
  init_anup_params(params, "", Ch, Cl, ctx.rng);
  params.set("high", random_tensor({1, Ch, 2, 2}, ctx.rng));
  const Tensor low = random_tensor({1, Cl, 2 * s, 2 * s}, ctx.rng);
  return block_gradients(ctx, "anup", params, low,
                         [&](const Scope& sc, const ad::Var& v) { return anup(sc, sc.param("high"), v, s); });
}

double gradient_dpsc(CaseContext& ctx) {
  const std::size_t C = 4;
  const DpscPath2 path2 = ctx.point.get("from_input", 0) ? DpscPath2::from_input : DpscPath2::cascaded;
  ParamStore params;
  init_dpsc_params(params, "", C, path2, ctx.rng);
  const Tensor x = random_tensor({1, C, 4, 4}, ctx.rng);
  return block_gradients(ctx, "dpsc", params, x, [&](const Scope& s, const ad::Var& v) { return dpsc(s, v, path2); });
}

double gradient_dfpn(CaseContext& ctx) {
  DfpnConfig config;
  config.channels = {2, 4};
  ParamStore params = init_dfpn_params(config, ctx.rng.next());
  params.set("coarse", random_tensor({1, 4, 2, 2}, ctx.rng));
  const Tensor fine = random_tensor({1, 2, 4, 4}, ctx.rng);
  const Tensor w0 = random_tensor({1, 2, 4, 4}, ctx.rng), w1 = random_tensor({1, 4, 2, 2}, ctx.rng);
  return block_gradients(ctx, "dfpn_fuse", params, fine, [&](const Scope& s, const ad::Var& v) {
    const std::vector<ad::Var> out = dfpn_fuse(s, {v, s.param("coarse")}, config);
    return ad::add(ad::weighted_sum(out[0], w0), ad::weighted_sum(out[1], w1));
  });
}

// ---------------------------------------------------------------------------
// FIRC3

struct FircCase {
  Tensor f;
  Tensor taps;
  Tensor b;
  PeriodizedKernel kernel;
};

FircCase firc_case(CaseContext& ctx, bool delta) {
  const std::size_t C = ctx.point.size("C", 3), H = ctx.point.size("H", 8), W = ctx.point.size("W", H);
  const std::size_t k = ctx.point.size("k", 3), s = ctx.point.size("s", 1);
  FircCase fc;
  fc.f = random_tensor({ctx.point.size("B", 1), C, H, W}, ctx.rng);
  fc.taps = delta ? delta_taps(C, k) : random_tensor({C, k, k}, ctx.rng);
  fc.b = random_tensor({C}, ctx.rng, -2, 2);
  fc.kernel = periodize_kernel(fc.taps, H * s, W * s);
  return fc;
}

FircConfig firc_config(const GridPoint& p) {
  FircConfig config;
  config.scale = p.size("s", 1);
  return config;
}

std::vector<double> eps_of(const Tensor& b) {
  const Tensor e = regularization(b);
  return {e.data().begin(), e.data().end()};
}

double firc_delta_identity(CaseContext& ctx) {
  const FircCase fc = firc_case(ctx, true);
  return max_rel_err(firc(fc.f, fc.kernel, fc.b, firc_config(ctx.point)), fc.f);
}

double firc_closed_form(CaseContext& ctx) {
  const FircCase fc = firc_case(ctx, false);
  const Tensor want = oracle::firc_closed_form_reference(fc.f, fc.kernel, eps_of(fc.b));
  return max_rel_err(firc(fc.f, fc.kernel, fc.b, firc_config(ctx.point)), want);
}

double firc_linearity(CaseContext& ctx) {
  const FircCase fc = firc_case(ctx, false);
  const FircConfig config = firc_config(ctx.point);
  const Tensor g = random_tensor(fc.f.shape(), ctx.rng);
  const double a = ctx.rng.uniform(-2, 2), c = ctx.rng.uniform(-2, 2);
  const Tensor lhs = firc(add(scale(fc.f, a), scale(g, c)), fc.kernel, fc.b, config);
  const Tensor rhs = add(scale(firc(fc.f, fc.kernel, fc.b, config), a), scale(firc(g, fc.kernel, fc.b, config), c));
  return max_rel_err(lhs, rhs);
}

double firc_shift(CaseContext& ctx) {
  const FircCase fc = firc_case(ctx, false);
  const FircConfig config = firc_config(ctx.point);
  const long dy = static_cast<long>(ctx.rng.next() % fc.f.height()), dx = static_cast<long>(ctx.rng.next() % fc.f.width());
  return max_abs_diff(firc(roll(fc.f, dy, dx), fc.kernel, fc.b, config), roll(firc(fc.f, fc.kernel, fc.b, config), dy, dx));
}

double firc_spectral_bound(CaseContext& ctx) {
  const FircCase fc = firc_case(ctx, false);
  FircStages stages;
  firc(fc.f, fc.kernel, fc.b, firc_config(ctx.point), &stages);
  const ComplexSpectrum F = fft2(fc.f);
  const std::vector<double> eps = eps_of(fc.b);
  const std::size_t plane = F.height() * F.width();
  double excess = 0.0;
  for (std::size_t i = 0; i < F.numel(); ++i) {
    const std::size_t c = (i / plane) % F.channels();
    const double bound = (std::abs(fc.kernel.otf[c * plane + i % plane]) + eps[c]) * std::abs(F[i]) / eps[c];
    excess = std::max(excess, (std::abs(stages.output[i]) - bound) / std::max(bound, 1e-300));
  }
  return std::max(excess, 0.0);
}

double firc_imag_residue(CaseContext& ctx) {
  const FircCase fc = firc_case(ctx, false);
  FircStages stages;
  const Tensor out = firc(fc.f, fc.kernel, fc.b, firc_config(ctx.point), &stages);
  double peak = 1.0;
  for (double v : out.data()) peak = std::max(peak, std::abs(v));
  return stages.imag_residue / peak;
}

double firc_low_b_finite(CaseContext& ctx) {
  FircCase fc = firc_case(ctx, false);
  fc.b = Tensor::full(fc.b.shape(), -20.0);
  FircConfig config = firc_config(ctx.point);
  config.imag_tolerance = INFINITY;
  return holds(firc(fc.f, fc.kernel, fc.b, config).all_finite());
}

double firc_output_extent(CaseContext& ctx) {
  const FircCase fc = firc_case(ctx, false);
  const std::size_t s = ctx.point.size("s", 1);
  const Tensor out = firc(fc.f, fc.kernel, fc.b, firc_config(ctx.point));
  return holds(out.shape() == Shape{fc.f.batch(), fc.f.channels(), fc.f.height() * s, fc.f.width() * s});
}

double periodization_matches_circular(CaseContext& ctx) {
  const std::size_t C = 2, H = ctx.point.size("H", 8), k = ctx.point.size("k", 3);
  const Tensor x = random_tensor({1, C, H, H}, ctx.rng);
  const Tensor taps = random_tensor({C, k, k}, ctx.rng);
  const PeriodizedKernel kernel = periodize_kernel(taps, H, H);
  ComplexSpectrum X = fft2(x);
  for (std::size_t i = 0; i < X.numel(); ++i) X[i] *= kernel.otf[i];
  return max_rel_err(ifft2(X), oracle::circular_conv2d_reference(x, taps));
}

double delta_otf_ones(CaseContext& ctx) {
  const PeriodizedKernel kernel = periodize_kernel(delta_taps(2, ctx.point.size("k", 3)), 8, 8);
  double err = 0.0;
  for (const auto& z : kernel.otf.data()) err = std::max(err, std::abs(z - 1.0));
  return err;
}

double softmax_dc_gain(CaseContext& ctx) {
  const std::size_t C = 4, H = 8;
  const PeriodizedKernel kernel = periodize_kernel(softmax_taps(C, ctx.point.size("k", 3), ctx.rng), H, H);
  double err = 0.0;
  for (std::size_t c = 0; c < C; ++c) err = std::max(err, std::abs(kernel.otf[c * H * H] - 1.0));
  return err;
}

FircConfig firc3_config(const GridPoint& p) {
  FircConfig config;
  config.channels = p.size("C", 16);
  config.iterations = p.size("n", 1);
  return config;
}

double firc3_shape(CaseContext& ctx) {
  const FircConfig config = firc3_config(ctx.point);
  const std::size_t H = ctx.point.size("H", 8);
  const Tensor x = draw(ctx, {1, config.channels, H, H});
  const Tensor y = firc3_block(x, config, init_firc3_params(config, ctx.rng.next()).to(ctx.dtype));
  return holds(y.shape() == x.shape() && y.all_finite());
}

// With identity cascades the block reduces to W3(W1 x + W2 x).
double firc3_identity_cascade(CaseContext& ctx) {
  const FircConfig config = firc3_config(ctx.point);
  ParamStore params = init_firc3_params(config, ctx.rng.next());
  for (std::size_t i = 0; i < config.iterations; ++i) {
    params.set("m." + std::to_string(i) + ".taps", delta_taps(config.hidden_channels(), config.kernel_size));
  }
  const Tensor x = random_tensor({1, config.channels, 8, 8}, ctx.rng);
  const Tensor inner = add(conv2d(x, params.get("cv1.weight"), params.get("cv1.bias")),
                           conv2d(x, params.get("cv2.weight"), params.get("cv2.bias")));
  return max_rel_err(firc3_block(x, config, params), conv2d(inner, params.get("cv3.weight"), params.get("cv3.bias")));
}

double gradient_firc(CaseContext& ctx) {
  const std::size_t C = 2, H = ctx.point.size("H", 4), s = ctx.point.size("s", 1), k = 3;
  ParamStore params;
  params.set("taps", softmax_taps(C, k, ctx.rng));
  params.set("b", random_tensor({C}, ctx.rng, -1, 1));
  const Tensor f = random_tensor({1, C, H, H}, ctx.rng);
  return block_gradients(ctx, "firc", params, f, [&](const Scope& sc, const ad::Var& v) {
    return firc(v, sc.param("taps"), sc.param("b"), s);
  });
}

double gradient_firc3(CaseContext& ctx) {
  FircConfig config;
  config.channels = 4;
  config.iterations = ctx.point.size("n", 1);
  const ParamStore params = init_firc3_params(config, ctx.rng.next());
  const Tensor x = random_tensor({1, 4, 4, 4}, ctx.rng);
  return block_gradients(ctx, "firc3_block", params, x,
                         [&](const Scope& s, const ad::Var& v) { return firc3_block(s, v, config); });
}

GridPoint pt(std::initializer_list<std::pair<const std::string, long>> v) { return GridPoint(v); }

}  // namespace

Suite make_dcfa_suite() {
  using detail::grid;
  Grid attention;
  for (long n : {4, 16, 64, 256})
    for (long d : {4, 8, 16, 32, 64}) attention.push_back(pt({{"N", n}, {"d", d}}));
  Grid structure;
  for (long n : {4, 16, 64, 256})
    for (long k : {1L, n / 4, n - 1}) structure.push_back(pt({{"N", n}, {"K", k}}));
  Grid shapes;
  for (long c : {8, 16, 32})
    for (long h : {8, 16})
      for (long n : {0, 1, 2}) shapes.push_back(pt({{"C", c}, {"n", n}, {"H", h}}));
  shapes.push_back(pt({{"C", 16}, {"n", 2}, {"H", 8}, {"final_only", 1}}));
  Suite s{"dcfa", {}};
  s.properties = {
      {"topk_dense_equivalence", attention, 1e-6, 1e-4, topk_dense_equivalence},
      {"dksa_dense_equivalence", grid(pt({{"C", 8}, {"H", 4}}), pt({{"C", 16}, {"H", 3}}), pt({{"C", 64}, {"H", 4}})),
       1e-6, 1e-4, dksa_dense_equivalence},
      {"topk_structure", structure, 0.0, 0.0, topk_structure},
      {"dynamic_k_formula", grid(pt({{"C", 8}, {"H", 4}}), pt({{"C", 16}, {"H", 6}})), 0.0, 0.0, dynamic_k_formula},
      {"dcfa_shape_contract", shapes, 0.0, 0.0, dcfa_shape},
      {"dcfa_residual_collapse", grid(pt({{"C", 8}, {"n", 1}}), pt({{"C", 16}, {"n", 3}}),
                                      pt({{"C", 8}, {"n", 2}, {"final_only", 1}})),
       0.0, 0.0, dcfa_residual_collapse},
      {"dcfa_empty_chain", grid(pt({{"C", 8}})), 0.0, 0.0, dcfa_empty_chain},
      {"dcfa_determinism", grid(pt({{"C", 16}, {"n", 2}})), 0.0, 0.0, dcfa_determinism},
      {"gradient_sglu", grid(pt({{"C", 4}})), 1e-5, 1e-5, gradient_sglu},
      {"gradient_dksa_fixed_k", grid(pt({{"C", 8}, {"H", 3}, {"K", 9}}), pt({{"C", 8}, {"H", 4}, {"K", 5}})), 1e-5, 1e-5,
       gradient_dksa},
      {"dksa_key_bias_gradient_vanishes", grid(pt({{"C", 8}, {"H", 3}, {"K", 9}}), pt({{"C", 8}, {"H", 4}, {"K", 5}})),
       1e-12, 1e-12, key_bias_gradient},
      {"gradient_dafb", grid(pt({})), 1e-5, 1e-5, gradient_dafb},
  };
  return s;
}

Suite make_dfpn_suite() {
  using detail::grid;
  Grid shapes;
  for (long L : {1, 2, 3})
    for (long c : {8, 16, 32})
      for (long h : {8, 16}) shapes.push_back(pt({{"L", L}, {"C", c}, {"H", h}}));
  shapes.push_back(pt({{"L", 2}, {"C", 8}, {"H", 9}, {"s", 3}}));
  shapes.push_back(pt({{"L", 3}, {"C", 8}, {"H", 16}, {"from_input", 1}}));
  Suite s{"dfpn", {}};
  s.properties = {
      {"anup_amplitude_law", grid(pt({{"s", 1}}), pt({{"s", 2}}), pt({{"s", 3}}), pt({{"s", 4}}), pt({{"s", 3}, {"H", 7}})),
       0.0, 0.0, amplitude_law},
      {"anup_normalized_entries", grid(pt({{"s", 2}}), pt({{"s", 3}}), pt({{"s", 4}})), 1e-15, 1e-15,
       amplitude_elementwise},
      {"dpsc_permutation_safety", grid(pt({{"C", 8}}), pt({{"C", 8}, {"from_input", 1}})), 0.0, 0.0, dpsc_permutation},
      {"dfpn_shape_and_call_counts", shapes, 0.0, 0.0, dfpn_shape},
      {"dfpn_single_level", grid(pt({{"L", 1}})), 0.0, 0.0, dfpn_single_level},
      {"dfpn_zero_pyramid", grid(pt({{"L", 3}, {"C", 8}})), 0.0, 0.0, dfpn_zero_pyramid},
      {"gradient_anup", grid(pt({{"s", 2}}), pt({{"s", 3}})), 1e-5, 1e-5, gradient_anup},
      {"gradient_dpsc", grid(pt({})), 1e-5, 1e-5, gradient_dpsc},
      {"gradient_dpsc_input_path", grid(pt({{"from_input", 1}})), 1e-5, 1e-5, gradient_dpsc},
      {"gradient_dfpn_fuse", grid(pt({})), 1e-5, 1e-5, gradient_dfpn},
  };
  return s;
}

Suite make_firc3_suite() {
  using detail::grid;
  const Grid planes = grid(pt({{"C", 2}, {"H", 8}}), pt({{"C", 3}, {"H", 16}, {"W", 12}, {"k", 5}}),
                           pt({{"C", 1}, {"H", 9}, {"k", 1}}), pt({{"B", 2}, {"C", 2}, {"H", 8}, {"k", 7}}));
  Grid shapes;
  for (long c : {8, 16, 32})
    for (long h : {8, 16})
      for (long n : {0, 1, 2}) shapes.push_back(pt({{"C", c}, {"n", n}, {"H", h}}));
  Suite s{"firc3", {}};
  s.properties = {
      {"firc_delta_identity", planes, 1e-8, 1e-8, firc_delta_identity},
      {"firc_closed_form", planes, 1e-8, 1e-8, firc_closed_form},
      {"firc_linearity", planes, 1e-9, 1e-9, firc_linearity},
      {"firc_shift_equivariance", planes, 1e-9, 1e-9, firc_shift},
      {"firc_spectral_bound", planes, 1e-9, 1e-9, firc_spectral_bound},
      {"firc_imag_residue", grid(pt({{"s", 1}}), pt({{"s", 2}}), pt({{"s", 3}, {"H", 5}})), 1e-9, 1e-9, firc_imag_residue},
      {"firc_low_b_finite", grid(pt({{"s", 1}}), pt({{"s", 2}})), 0.0, 0.0, firc_low_b_finite},
      {"firc_output_extent", grid(pt({{"s", 1}}), pt({{"s", 2}}), pt({{"s", 3}, {"H", 5}})), 0.0, 0.0, firc_output_extent},
      {"kernel_periodization", grid(pt({{"k", 1}, {"H", 8}}), pt({{"k", 3}, {"H", 8}}), pt({{"k", 5}, {"H", 8}}),
                                    pt({{"k", 1}, {"H", 16}}), pt({{"k", 3}, {"H", 16}}), pt({{"k", 5}, {"H", 16}})),
       1e-8, 1e-8, periodization_matches_circular},
      {"delta_otf_all_ones", grid(pt({{"k", 3}}), pt({{"k", 5}})), 0.0, 0.0, delta_otf_ones},
      {"softmax_taps_dc_gain", grid(pt({{"k", 3}})), 1e-15, 1e-15, softmax_dc_gain},
      {"firc3_shape_contract", shapes, 0.0, 0.0, firc3_shape},
      {"firc3_identity_cascade", grid(pt({{"C", 8}, {"n", 0}}), pt({{"C", 8}, {"n", 2}})), 1e-8, 1e-8,
       firc3_identity_cascade},
      {"gradient_firc", grid(pt({{"s", 1}}), pt({{"s", 2}, {"H", 3}})), 1e-5, 1e-5, gradient_firc},
      {"gradient_firc3_block", grid(pt({{"n", 1}})), 1e-5, 1e-5, gradient_firc3},
  };
  return s;
}

}  // namespace dfir::verify
