#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dfir/fft.hpp"
#include "dfir/tensor.hpp"

namespace dfir {

// ---------------------------------------------------------------------------
// Convolution

enum class PaddingMode { zero, circular };

struct Conv2dOptions {
  std::size_t groups = 1;
  PaddingMode padding = PaddingMode::zero;
  std::size_t stride = 1;
};

// Full description of a convolution layer. Weight shape is
// (out_channels, in_channels / groups, k, k); bias is (out_channels) or
// undefined.
struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 1;
  std::size_t groups = 1;
  PaddingMode padding_mode = PaddingMode::zero;
  std::size_t stride = 1;
  Tensor weight;
  Tensor bias;

  Conv2dOptions options() const { return {groups, padding_mode, stride}; }
  void validate() const;
};

// Same-padded 2-D convolution (cross-correlation, as in every DL framework).
// Output spatial extent is ceil(H / stride) x ceil(W / stride).
Tensor conv2d(const Tensor& input, const ConvSpec& spec);
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& options = {});

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;  // undefined when the forward pass had no bias
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, bool has_bias,
                            const Tensor& grad_output, const Conv2dOptions& options = {});

// ---------------------------------------------------------------------------
// Elementwise

double gelu(double x);             // exact erf form
double gelu_derivative(double x);  // Phi(x) + x * phi(x)
double sigmoid(double x);

Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// ---------------------------------------------------------------------------
// Softmax with an explicit keep set per row

// keep[r] lists the column indices retained in row r. Rows are the leading
// numel / last-dim slices of `logits`.
using KeepSets = std::vector<std::vector<std::size_t>>;

// Kept entries are exp-normalized over the keep set; every other entry is
// exactly zero. Throws on an empty keep set or an out-of-range index.
Tensor masked_softmax(const Tensor& logits, const KeepSets& keep);

// ---------------------------------------------------------------------------
// Normalization

enum class NormKind { group_norm, batch_affine };

// batch_affine is inference-mode batch normalization: running statistics are
// folded into `gain` and `shift`, leaving a per-channel affine map.
struct NormSpec {
  NormKind kind = NormKind::group_norm;
  std::size_t num_groups = 1;
  double eps = 1e-5;
  Tensor gain;   // (C)
  Tensor shift;  // (C)
};

// min(16, C) when that divides C, otherwise the largest divisor of C below 16.
std::size_t default_num_groups(std::size_t channels);
NormSpec make_group_norm(std::size_t channels, std::size_t num_groups = 0, double eps = 1e-5);

Tensor group_norm(const Tensor& x, const NormSpec& spec);
Tensor channel_affine(const Tensor& x, const Tensor& gain, const Tensor& shift);
Tensor normalize(const Tensor& x, const NormSpec& spec);

// ---------------------------------------------------------------------------
// Resampling, shuffling, pooling, layout

Tensor nearest_upsample(const Tensor& x, std::size_t s);
Tensor zero_insert_upsample(const Tensor& x, std::size_t s);

// Two-group channel shuffle: input channel g * (C/2) + j lands at j * 2 + g.
Tensor channel_shuffle(const Tensor& x);

// Mean over the s x s alias set {(u + m H/s, v + n W/s)}; output (B, C, H/s, W/s).
// Means are correctly rounded, so averaging s^2 equal values returns that value.
ComplexSpectrum block_avg_spectrum(const ComplexSpectrum& spectrum, std::size_t s);
// Tiles the spectrum s x s times; output (B, C, sH, sW).
ComplexSpectrum repeat_spectrum(const ComplexSpectrum& spectrum, std::size_t s);

Tensor avg_pool(const Tensor& x, std::size_t s);  // non-overlapping s x s windows
Tensor global_avg_pool(const Tensor& x);          // (B, C, 1, 1)

Tensor concat_channels(std::span<const Tensor> parts);
Tensor slice_channels(const Tensor& x, std::size_t start, std::size_t count);

// Circular shift of the last two axes: out(h, w) = in(h - dy, w - dx).
Tensor roll(const Tensor& x, long dy, long dx);

// ---------------------------------------------------------------------------
// Reductions and comparison metrics

// Correctly rounded sum (Shewchuk partials); independent of summation order.
double exact_sum(std::span<const double> values);
// Correctly rounded mean; exact whenever the true mean is representable.
double exact_mean(std::span<const double> values);
double l1_norm(const Tensor& x);
double sum(const Tensor& x);

double max_abs_diff(const Tensor& a, const Tensor& b);
// max |a - b| / max(|a|, |b|, 1e-8) over all elements.
double max_rel_err(const Tensor& a, const Tensor& b);
double max_rel_err(const ComplexSpectrum& a, const ComplexSpectrum& b);

}  // namespace dfir
