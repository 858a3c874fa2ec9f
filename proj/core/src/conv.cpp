#include <string>
#include <vector>

#include "dfir/ops.hpp"

namespace dfir {
namespace {

struct ConvGeometry {
  std::size_t batch, in_channels, out_channels, height, width;
  std::size_t out_height, out_width;
  std::size_t kh, kw, pad_h, pad_w, stride, groups;
  std::size_t in_per_group, out_per_group;
  // For every kernel offset, the input row/column read by each output
  // row/column, or -1 when it falls in zero padding.
  std::vector<std::vector<long>> row_index;
  std::vector<std::vector<long>> col_index;
};

std::vector<std::vector<long>> build_index(std::size_t in_extent, std::size_t out_extent,
                                           std::size_t k, std::size_t pad, std::size_t stride,
                                           PaddingMode mode) {
  std::vector<std::vector<long>> table(k, std::vector<long>(out_extent));
  const long n = static_cast<long>(in_extent);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t o = 0; o < out_extent; ++o) {
      long i = static_cast<long>(o * stride + t) - static_cast<long>(pad);
      if (mode == PaddingMode::circular) {
        i = ((i % n) + n) % n;
      } else if (i < 0 || i >= n) {
        i = -1;
      }
      table[t][o] = i;
    }
  }
  return table;
}

ConvGeometry make_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias,
                           const Conv2dOptions& opt) {
  require_rank4(input, "conv2d input");
  if (!weight.defined() || weight.rank() != 4) {
    throw ShapeError("weight", "conv2d weight must be (out, in/groups, kh, kw)");
  }
  ConvGeometry g{};
  g.batch = input.batch();
  g.in_channels = input.channels();
  g.height = input.height();
  g.width = input.width();
  g.out_channels = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.groups = opt.groups;
  g.stride = opt.stride;

  if (g.kh % 2 == 0 || g.kw % 2 == 0) {
    throw ShapeError("kernel_size", "conv2d kernel extents must be odd, got " + std::to_string(g.kh) + "x" +
                                        std::to_string(g.kw));
  }
  if (g.stride < 1) throw ShapeError("stride", "conv2d stride must be >= 1");
  if (g.groups < 1 || g.in_channels % g.groups != 0 || g.out_channels % g.groups != 0) {
    throw ShapeError("groups", "conv2d groups=" + std::to_string(g.groups) +
                                   " must divide in_channels=" + std::to_string(g.in_channels) +
                                   " and out_channels=" + std::to_string(g.out_channels));
  }
  g.in_per_group = g.in_channels / g.groups;
  g.out_per_group = g.out_channels / g.groups;
  if (weight.dim(1) != g.in_per_group) {
    throw ShapeError("in_channels", "conv2d input has " + std::to_string(g.in_channels) +
                                        " channels but weight expects " +
                                        std::to_string(weight.dim(1) * g.groups));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_channels)) {
    throw ShapeError("bias", "conv2d bias must have out_channels=" + std::to_string(g.out_channels) +
                                 " entries");
  }
  if (opt.padding == PaddingMode::circular && (g.kh > g.height || g.kw > g.width)) {
    throw ShapeError(g.kh > g.height ? "height" : "width",
                     "circular padding needs kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                         " within spatial extent " + shape_string(input.shape()));
  }
  g.pad_h = g.kh / 2;
  g.pad_w = g.kw / 2;
  g.out_height = (g.height + 2 * g.pad_h - g.kh) / g.stride + 1;
  g.out_width = (g.width + 2 * g.pad_w - g.kw) / g.stride + 1;
  g.row_index = build_index(g.height, g.out_height, g.kh, g.pad_h, g.stride, opt.padding);
  g.col_index = build_index(g.width, g.out_width, g.kw, g.pad_w, g.stride, opt.padding);
  return g;
}

}  // namespace

void ConvSpec::validate() const {
  if (kernel_size % 2 == 0 || kernel_size < 1) {
    throw ShapeError("kernel_size", "kernel size must be an odd integer >= 1");
  }
  if (groups < 1 || in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("groups", "groups must divide both channel counts");
  }
  const Shape expected{out_channels, in_channels / groups, kernel_size, kernel_size};
  if (weight.shape() != expected) {
    throw ShapeError("weight", "weight shape " + shape_string(weight.shape()) + " != expected " +
                                   shape_string(expected));
  }
  if (bias.defined() && bias.shape() != Shape{out_channels}) {
    throw ShapeError("bias", "bias must have out_channels entries");
  }
}

Tensor conv2d(const Tensor& input, const ConvSpec& spec) {
  spec.validate();
  require_rank4(input, "conv2d input");
  if (input.channels() != spec.in_channels) {
    throw ShapeError("in_channels", "input has " + std::to_string(input.channels()) +
                                        " channels, spec expects " + std::to_string(spec.in_channels));
  }
  return conv2d(input, spec.weight, spec.bias, spec.options());
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& options) {
  const ConvGeometry g = make_geometry(input, weight, bias, options);
  DType dtype = promote(input.dtype(), weight.dtype());
  Tensor out({g.batch, g.out_channels, g.out_height, g.out_width}, DType::f64);

  const auto in = input.data();
  const auto w = weight.data();
  auto o = out.data();
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_height * g.out_width;

  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      double* dst = o.data() + (b * g.out_channels + oc) * out_plane;
      const double init = bias.defined() ? bias[oc] : 0.0;
      for (std::size_t i = 0; i < out_plane; ++i) dst[i] = init;
      const std::size_t group = oc / g.out_per_group;
      for (std::size_t icg = 0; icg < g.in_per_group; ++icg) {
        const std::size_t ic = group * g.in_per_group + icg;
        const double* src = in.data() + (b * g.in_channels + ic) * in_plane;
        const double* wk = w.data() + (oc * g.in_per_group + icg) * g.kh * g.kw;
        for (std::size_t kh = 0; kh < g.kh; ++kh) {
          const auto& rows = g.row_index[kh];
          for (std::size_t kw = 0; kw < g.kw; ++kw) {
            const double wv = wk[kh * g.kw + kw];
            const auto& cols = g.col_index[kw];
            for (std::size_t oh = 0; oh < g.out_height; ++oh) {
              const long ih = rows[oh];
              if (ih < 0) continue;
              const double* srow = src + static_cast<std::size_t>(ih) * g.width;
              double* drow = dst + oh * g.out_width;
              for (std::size_t ow = 0; ow < g.out_width; ++ow) {
                const long iw = cols[ow];
                if (iw >= 0) drow[ow] += wv * srow[iw];
              }
            }
          }
        }
      }
    }
  }
  out.set_dtype(dtype);
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, bool has_bias,
                            const Tensor& grad_output, const Conv2dOptions& options) {
  const ConvGeometry g = make_geometry(input, weight, Tensor{}, options);
  const Shape out_shape{g.batch, g.out_channels, g.out_height, g.out_width};
  if (grad_output.shape() != out_shape) {
    throw ShapeError("grad_output", "conv2d_backward: grad shape " +
                                        shape_string(grad_output.shape()) + " != output shape " +
                                        shape_string(out_shape));
  }
  Conv2dGrads grads{Tensor(input.shape()), Tensor(weight.shape()), Tensor{}};
  if (has_bias) grads.bias = Tensor({g.out_channels});

  const auto in = input.data();
  const auto w = weight.data();
  const auto go = grad_output.data();
  auto gi = grads.input.data();
  auto gw = grads.weight.data();
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_height * g.out_width;

  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      const double* gsrc = go.data() + (b * g.out_channels + oc) * out_plane;
      if (has_bias) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) acc += gsrc[i];
        grads.bias[oc] += acc;
      }
      const std::size_t group = oc / g.out_per_group;
      for (std::size_t icg = 0; icg < g.in_per_group; ++icg) {
        const std::size_t ic = group * g.in_per_group + icg;
        const double* src = in.data() + (b * g.in_channels + ic) * in_plane;
        double* gdst = gi.data() + (b * g.in_channels + ic) * in_plane;
        const std::size_t wbase = (oc * g.in_per_group + icg) * g.kh * g.kw;
        for (std::size_t kh = 0; kh < g.kh; ++kh) {
          const auto& rows = g.row_index[kh];
          for (std::size_t kw = 0; kw < g.kw; ++kw) {
            const double wv = w[wbase + kh * g.kw + kw];
            const auto& cols = g.col_index[kw];
            double wacc = 0.0;
            for (std::size_t oh = 0; oh < g.out_height; ++oh) {
              const long ih = rows[oh];
              if (ih < 0) continue;
              const std::size_t row = static_cast<std::size_t>(ih) * g.width;
              const double* grow = gsrc + oh * g.out_width;
              for (std::size_t ow = 0; ow < g.out_width; ++ow) {
                const long iw = cols[ow];
                if (iw < 0) continue;
                gdst[row + iw] += wv * grow[ow];
                wacc += src[row + iw] * grow[ow];
              }
            }
            gw[wbase + kh * g.kw + kw] += wacc;
          }
        }
      }
    }
  }
  return grads;
}

}  // namespace dfir
