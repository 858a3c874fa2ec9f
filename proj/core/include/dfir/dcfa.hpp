#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfir/attention.hpp"
#include "dfir/params.hpp"

namespace dfir {

// How the CSP exit concatenates the DAFB chain.
enum class ConcatMode {
  dense,       // [F1, F2, G1(F2), ..., Gn(...)]: every intermediate output
  final_only,  // [F1, Gn(...)]: passthrough half plus the chain's final output
};

struct DcfaConfig {
  std::size_t channels = 16;
  std::size_t stack_depth = 1;
  std::size_t heads = 0;        // 0 selects the default for the attended width
  double dropout_p = 0.0;
  bool training = false;        // dropout is applied only in training mode
  std::size_t norm_groups = 0;  // 0 selects default_num_groups
  double norm_eps = 1e-5;
  std::uint64_t seed = 0;
  ConcatMode concat = ConcatMode::dense;
  // Overrides the gate's K (clamped to [1, N]). Used for verification.
  std::optional<std::size_t> fixed_k;

  // DAFB width: the CSP split halves the projected channels.
  std::size_t hidden_channels() const { return channels / 2; }
  // Throws ShapeError if channels is not a positive multiple of 4 (both the
  // CSP split and the DKSA split halve channels) or heads does not divide
  // the attended width.
  void validate() const;
};

// 4 heads when the attended width is at least 32, otherwise 1.
std::size_t default_heads(std::size_t attended_channels);

struct DksaOptions {
  std::size_t heads = 0;
  std::size_t norm_groups = 0;
  double norm_eps = 1e-5;
  std::optional<std::size_t> fixed_k;
};

struct SgluOptions {
  double dropout_p = 0.0;
  bool training = false;
  std::uint64_t seed = 0;
};

// What a DKSA forward pass selected, for inspection and tests.
struct DksaTrace {
  std::vector<std::size_t> k;             // per batch sample
  std::vector<SparseAttnPlan> plans;      // per (batch, head)
  std::size_t heads = 0;
};

// Parameter initialization. Every name is relative to `prefix`.
void init_dksa_params(ParamStore& params, const std::string& prefix, std::size_t channels, Rng& rng);
void init_sglu_params(ParamStore& params, const std::string& prefix, std::size_t channels, Rng& rng);
void init_dafb_params(ParamStore& params, const std::string& prefix, std::size_t channels, Rng& rng);
ParamStore init_dcfa_params(const DcfaConfig& config, std::uint64_t seed);

// Gate logit AvgPool(psi(x)) per sample, psi = 1x1 conv -> GELU -> 1x1 conv
// to one channel. `gate` scopes the "conv1" and "conv2" parameters.
std::vector<double> gate_logits(const Tensor& x, const ParamStore& params, const std::string& gate_prefix);
// K per sample: clamp(floor(N * sigmoid(logit)), 1, N) with N = H * W.
std::vector<std::size_t> dynamic_k(const Tensor& x, const ParamStore& params, const std::string& gate_prefix);

// Tape forms: building blocks that also provide gradients.
ad::Var dksa(const Scope& scope, const ad::Var& x, const DksaOptions& options, DksaTrace* trace = nullptr);
ad::Var sglu(const Scope& scope, const ad::Var& x, const SgluOptions& options = {});
ad::Var dafb(const Scope& scope, const ad::Var& x, const DksaOptions& attn, const SgluOptions& ffn);
ad::Var dcfa_block(const Scope& scope, const ad::Var& x, const DcfaConfig& config);

// Forward-only forms.
Tensor dksa(const Tensor& x, const ParamStore& params, const DksaOptions& options,
            const std::string& prefix = "", DksaTrace* trace = nullptr);
Tensor sglu(const Tensor& x, const ParamStore& params, const SgluOptions& options = {},
            const std::string& prefix = "");
Tensor dafb(const Tensor& x, const ParamStore& params, const DksaOptions& attn, const SgluOptions& ffn,
            const std::string& prefix = "");
Tensor dcfa_block(const Tensor& x, const DcfaConfig& config, const ParamStore& params);

// DKSA/SGLU options a DcfaConfig implies for its DAFB chain.
DksaOptions dksa_options(const DcfaConfig& config);
SgluOptions sglu_options(const DcfaConfig& config, std::size_t block_index);

}  // namespace dfir
