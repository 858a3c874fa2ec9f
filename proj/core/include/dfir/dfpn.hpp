#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfir/params.hpp"

namespace dfir {

// Feature pyramid, finest level first. Adjacent levels differ by an exact
// spatial factor s (level i has s times the extent of level i + 1).
struct PyramidLevels {
  std::vector<Tensor> levels;

  std::size_t size() const noexcept { return levels.size(); }
  void validate(std::size_t scale) const;
};

// Where the DPSC detail path takes its input from.
enum class DpscPath2 {
  cascaded,    // GELU(W_d * (W_conv * F1)): consumes path 1's output
  from_input,  // GELU(W_d * GELU(W_pw * F)): consumes the block input
};

struct DfpnConfig {
  std::size_t scale = 2;
  std::vector<std::size_t> channels;  // per level, finest first; each even
  DpscPath2 path2 = DpscPath2::cascaded;

  void validate() const;
};

// Call counts and stage norms recorded by dfpn_fuse.
struct FuseTrace {
  std::size_t anup_calls = 0;
  std::size_t dpsc_calls = 0;
};

// Intermediate tensors of one ANUP call.
struct AnupStages {
  Tensor upsampled;   // U_s(high)
  Tensor normalized;  // U_s(high) / s^2
  Tensor output;      // 1x1 conv of [normalized, low]
};

void init_dpsc_params(ParamStore& params, const std::string& prefix, std::size_t channels, DpscPath2 path2,
                      Rng& rng);
void init_anup_params(ParamStore& params, const std::string& prefix, std::size_t high_channels,
                      std::size_t low_channels, Rng& rng);
ParamStore init_dfpn_params(const DfpnConfig& config, std::uint64_t seed);

// Nearest-neighbour upsampling followed by division by s^2; preserves the L1
// mass of `high`.
Tensor amplitude_normalize(const Tensor& high, std::size_t s);

ad::Var amplitude_normalize(const ad::Var& high, std::size_t s);
ad::Var anup(const Scope& scope, const ad::Var& high, const ad::Var& low, std::size_t s);
ad::Var dpsc(const Scope& scope, const ad::Var& x, DpscPath2 path2 = DpscPath2::cascaded);
std::vector<ad::Var> dfpn_fuse(const Scope& scope, const std::vector<ad::Var>& levels, const DfpnConfig& config,
                               FuseTrace* trace = nullptr);

Tensor anup(const Tensor& high, const Tensor& low, std::size_t s, const ParamStore& params,
            const std::string& prefix = "", AnupStages* stages = nullptr);
Tensor dpsc(const Tensor& x, const ParamStore& params, DpscPath2 path2 = DpscPath2::cascaded,
            const std::string& prefix = "");
PyramidLevels dfpn_fuse(const PyramidLevels& pyramid, const DfpnConfig& config, const ParamStore& params,
                        FuseTrace* trace = nullptr);

}  // namespace dfir
