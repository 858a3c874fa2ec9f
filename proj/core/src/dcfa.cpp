#include "dfir/dcfa.hpp"

#include <algorithm>

namespace dfir {
namespace {

std::vector<std::size_t> resolve_k(const DksaOptions& options, const Tensor& normed, const Scope& scope) {
  const std::size_t tokens = normed.height() * normed.width();
  if (options.fixed_k) {
    const std::size_t k = std::clamp<std::size_t>(*options.fixed_k, 1, tokens);
    return std::vector<std::size_t>(normed.batch(), k);
  }
  // K is a stop-gradient quantity: computed from values, never recorded.
  const Tensor hidden = gelu(conv2d(normed, scope.raw("gate.conv1.weight"), scope.raw("gate.conv1.bias")));
  const Tensor logit = global_avg_pool(conv2d(hidden, scope.raw("gate.conv2.weight"),
                                              scope.raw("gate.conv2.bias")));
  std::vector<std::size_t> ks(normed.batch());
  for (std::size_t b = 0; b < ks.size(); ++b) ks[b] = k_from_gate(logit[b], tokens);
  return ks;
}

template <typename Build>
Tensor run_forward(const ParamStore& params, const std::string& prefix, const Tensor& x, Build build) {
  ad::Tape tape;
  Scope scope(tape, params, prefix);
  return build(scope, tape.constant(x)).tensor();
}

}  // namespace

void DcfaConfig::validate() const {
  if (channels == 0 || channels % 4 != 0) {
    throw ShapeError("channels", "DCFA needs channels divisible by 4 (CSP and DKSA both halve), got " +
                                     std::to_string(channels));
  }
  const std::size_t attended = hidden_channels() / 2;
  const std::size_t h = heads ? heads : default_heads(attended);
  if (attended % h != 0) {
    throw ShapeError("heads", "heads=" + std::to_string(h) + " must divide the attended width " +
                                  std::to_string(attended));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw Error("dropout_p must lie in [0, 1)");
  if (!(norm_eps > 0)) throw Error("norm_eps must be positive");
}

std::size_t default_heads(std::size_t attended_channels) { return attended_channels >= 32 ? 4 : 1; }

void init_dksa_params(ParamStore& params, const std::string& prefix, std::size_t channels, Rng& rng) {
  const std::size_t half = channels / 2;
  params.init_affine(prefix + "norm", half);
  params.init_conv(prefix + "q", half, half, 1, 1, rng);
  params.init_conv(prefix + "k", half, half, 1, 1, rng);
  params.init_conv(prefix + "v", half, half, 1, 1, rng);
  params.init_conv(prefix + "gate.conv1", half, half, 1, 1, rng);
  params.init_conv(prefix + "gate.conv2", half, 1, 1, 1, rng);
  params.init_conv(prefix + "proj", channels, channels, 1, 1, rng);
}

void init_sglu_params(ParamStore& params, const std::string& prefix, std::size_t channels, Rng& rng) {
  params.init_conv(prefix + "gate", channels, channels, 1, 1, rng);
  params.init_conv(prefix + "value", channels, channels, 1, 1, rng);
  params.init_conv(prefix + "dw", channels, channels, 3, channels, rng);
  params.init_conv(prefix + "out", channels, channels, 1, 1, rng);
}

void init_dafb_params(ParamStore& params, const std::string& prefix, std::size_t channels, Rng& rng) {
  params.init_conv(prefix + "dw", channels, channels, 3, channels, rng, /*with_bias=*/false);
  params.init_affine(prefix + "bn", channels);
  init_dksa_params(params, prefix + "attn.", channels, rng);
  init_sglu_params(params, prefix + "ffn.", channels, rng);
}

ParamStore init_dcfa_params(const DcfaConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore params;
  const std::size_t c = config.hidden_channels();
  params.init_conv("cv1", config.channels, config.channels, 1, 1, rng);
  for (std::size_t i = 0; i < config.stack_depth; ++i) {
    init_dafb_params(params, "blocks." + std::to_string(i) + ".", c, rng);
  }
  const std::size_t concat_width =
      config.concat == ConcatMode::dense ? (2 + config.stack_depth) * c : config.channels;
  params.init_conv("cv2", concat_width, config.channels, 1, 1, rng);
  return params;
}

std::vector<double> gate_logits(const Tensor& x, const ParamStore& params, const std::string& gate_prefix) {
  const Tensor hidden =
      gelu(conv2d(x, params.get(gate_prefix + "conv1.weight"), params.get(gate_prefix + "conv1.bias")));
  const Tensor pooled = global_avg_pool(
      conv2d(hidden, params.get(gate_prefix + "conv2.weight"), params.get(gate_prefix + "conv2.bias")));
  return {pooled.data().begin(), pooled.data().end()};
}

std::vector<std::size_t> dynamic_k(const Tensor& x, const ParamStore& params, const std::string& gate_prefix) {
  const std::size_t tokens = x.height() * x.width();
  std::vector<std::size_t> ks;
  for (double logit : gate_logits(x, params, gate_prefix)) ks.push_back(k_from_gate(logit, tokens));
  return ks;
}

DksaOptions dksa_options(const DcfaConfig& config) {
  return {config.heads, config.norm_groups, config.norm_eps, config.fixed_k};
}

SgluOptions sglu_options(const DcfaConfig& config, std::size_t block_index) {
  return {config.dropout_p, config.training, derive_seed(config.seed, block_index)};
}

ad::Var dksa(const Scope& scope, const ad::Var& x, const DksaOptions& options, DksaTrace* trace) {
  const Tensor& in = x.tensor();
  require_rank4(in, "dksa");
  const std::size_t c = in.channels();
  if (c % 2 != 0) {
    throw ShapeError("channels", "dksa needs an even channel count, got " + std::to_string(c));
  }
  const std::size_t half = c / 2;
  const std::size_t heads = options.heads ? options.heads : default_heads(half);
  if (half % heads != 0) {
    throw ShapeError("heads", "dksa: heads=" + std::to_string(heads) + " must divide " + std::to_string(half));
  }
  const std::size_t groups = options.norm_groups ? options.norm_groups : default_num_groups(half);

  const ad::Var attended = ad::slice_channels(x, 0, half);
  const ad::Var passthrough = ad::slice_channels(x, half, half);
  const ad::Var normed =
      ad::group_norm(attended, scope.param("norm.gain"), scope.param("norm.shift"), groups, options.norm_eps);

  const std::vector<std::size_t> ks = resolve_k(options, normed.tensor(), scope);
  const ad::Var q = scoped_conv(scope, "q", normed);
  const ad::Var k = scoped_conv(scope, "k", normed);
  const ad::Var v = scoped_conv(scope, "v", normed);
  const ad::Var attn = ad::topk_attention(q, k, v, heads, ks, trace ? &trace->plans : nullptr);
  if (trace) {
    trace->k = ks;
    trace->heads = heads;
  }
  return scoped_conv(scope, "proj", ad::concat_channels({attn, passthrough}));
}

ad::Var sglu(const Scope& scope, const ad::Var& x, const SgluOptions& options) {
  const std::size_t c = x.tensor().channels();
  const ad::Var gate_stream = scoped_conv(scope, "gate", x);
  const ad::Var value_stream = scoped_conv(scope, "value", x);
  const ad::Var spatial = scoped_conv(scope, "dw", gate_stream, {.groups = c});
  ad::Var gated = ad::mul(ad::gelu(spatial), value_stream);
  gated = ad::dropout(gated, options.training ? options.dropout_p : 0.0, options.seed);
  return ad::add(x, scoped_conv(scope, "out", gated));
}

ad::Var dafb(const Scope& scope, const ad::Var& x, const DksaOptions& attn, const SgluOptions& ffn) {
  const std::size_t c = x.tensor().channels();
  const ad::Var local = ad::conv2d(x, scope.param("dw.weight"), std::nullopt, {.groups = c});
  const ad::Var h = ad::add(x, ad::channel_affine(local, scope.param("bn.gain"), scope.param("bn.shift")));
  const ad::Var attended = ad::add(h, dksa(scope.sub("attn"), h, attn));
  return sglu(scope.sub("ffn"), attended, ffn);
}

ad::Var dcfa_block(const Scope& scope, const ad::Var& x, const DcfaConfig& config) {
  config.validate();
  const Tensor& in = x.tensor();
  require_rank4(in, "dcfa_block");
  if (in.channels() != config.channels) {
    throw ShapeError("channels", "dcfa_block: input has " + std::to_string(in.channels()) +
                                     " channels, config expects " + std::to_string(config.channels));
  }
  const std::size_t c = config.hidden_channels();
  const ad::Var projected = scoped_conv(scope, "cv1", x);
  const ad::Var f1 = ad::slice_channels(projected, 0, c);
  const ad::Var f2 = ad::slice_channels(projected, c, c);

  std::vector<ad::Var> parts{f1, f2};
  ad::Var current = f2;
  const DksaOptions attn = dksa_options(config);
  for (std::size_t i = 0; i < config.stack_depth; ++i) {
    current = dafb(scope.sub("blocks." + std::to_string(i)), current, attn, sglu_options(config, i));
    if (config.concat == ConcatMode::dense) parts.push_back(current);
  }
  if (config.concat == ConcatMode::final_only) parts = {f1, current};
  return scoped_conv(scope, "cv2", ad::concat_channels(parts));
}

Tensor dksa(const Tensor& x, const ParamStore& params, const DksaOptions& options, const std::string& prefix,
            DksaTrace* trace) {
  return run_forward(params, prefix, x,
                     [&](const Scope& s, const ad::Var& v) { return dksa(s, v, options, trace); });
}

Tensor sglu(const Tensor& x, const ParamStore& params, const SgluOptions& options, const std::string& prefix) {
  return run_forward(params, prefix, x, [&](const Scope& s, const ad::Var& v) { return sglu(s, v, options); });
}

Tensor dafb(const Tensor& x, const ParamStore& params, const DksaOptions& attn, const SgluOptions& ffn,
            const std::string& prefix) {
  return run_forward(params, prefix, x,
                     [&](const Scope& s, const ad::Var& v) { return dafb(s, v, attn, ffn); });
}

Tensor dcfa_block(const Tensor& x, const DcfaConfig& config, const ParamStore& params) {
  return run_forward(params, "", x,
                     [&](const Scope& s, const ad::Var& v) { return dcfa_block(s, v, config); });
}

}  // namespace dfir
