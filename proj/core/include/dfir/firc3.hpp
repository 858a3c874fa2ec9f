#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfir/params.hpp"

namespace dfir {

struct FircConfig {
  std::size_t channels = 16;
  std::size_t iterations = 1;  // cascade length n inside firc3_block
  double expansion = 0.5;      // hidden width C' = floor(e * C)
  std::size_t scale = 1;
  std::size_t kernel_size = 3;
  double eps = 1e-5;
  // The inverse transform's imaginary part must stay below this fraction of
  // max(1, max|real|); larger residue means the spectrum lost its symmetry.
  double imag_tolerance = 1e-6;

  std::size_t hidden_channels() const;
  void validate() const;
};

// Depthwise kernel (C, k, k) together with its optical transfer function on a
// (height, width) grid: fft2 of the zero-padded kernel rolled so the centre
// tap sits at (0, 0). Multiplying a spectrum by `otf` is circular convolution.
struct PeriodizedKernel {
  Tensor taps;
  std::size_t height = 0;
  std::size_t width = 0;
  ComplexSpectrum otf;  // (1, C, height, width)
};

PeriodizedKernel periodize_kernel(const Tensor& taps, std::size_t height, std::size_t width);

// Per-channel softmax over k*k taps of uniform random logits; every channel sums to 1.
Tensor softmax_taps(std::size_t channels, std::size_t k, Rng& rng);
// Centre tap 1, all others 0.
Tensor delta_taps(std::size_t channels, std::size_t k);

// sigmoid(b - 9) + eps, per channel.
Tensor regularization(const Tensor& b, double eps = 1e-5);

// Intermediate spectra of one firc evaluation (forward-only form).
struct FircStages {
  ComplexSpectrum residual;    // F_R
  ComplexSpectrum correction;  // W_inv
  ComplexSpectrum output;      // spectrum before the inverse transform
  double imag_residue = 0.0;
};

void init_firc_params(ParamStore& params, const std::string& prefix, std::size_t channels, std::size_t k, Rng& rng);
ParamStore init_firc3_params(const FircConfig& config, std::uint64_t seed);

// Frequency-domain refinement of F (B, C, H, W) to (B, C, sH, sW) with taps
// (C, k, k) and per-channel b (C). Non-finite intermediates raise
// NumericError naming the stage.
ad::Var firc(const ad::Var& f, const ad::Var& taps, const ad::Var& b, std::size_t s, double eps = 1e-5,
             double imag_tolerance = 1e-6);
ad::Var firc3_block(const Scope& scope, const ad::Var& x, const FircConfig& config);

Tensor firc(const Tensor& f, const PeriodizedKernel& kernel, const Tensor& b, const FircConfig& config,
            FircStages* stages = nullptr);
Tensor firc3_block(const Tensor& x, const FircConfig& config, const ParamStore& params);

}  // namespace dfir
