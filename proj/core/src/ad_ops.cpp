#include <algorithm>
#include <cmath>

#include "dfir/autodiff.hpp"
#include "dfir/random.hpp"

namespace dfir::ad {
namespace {

using Complex = std::complex<double>;

Tape& tape_of(const Var& v) { return v.tape(); }

Var record(const std::string& op, Value out, const std::vector<Var>& inputs, BackwardFn fn) {
  return tape_of(inputs.front()).record(op, std::move(out), inputs, std::move(fn));
}

const Tensor& as_tensor(const Value& v) { return std::get<Tensor>(v); }
const ComplexSpectrum& as_spectrum(const Value& v) { return std::get<ComplexSpectrum>(v); }

// Output shape for a batch-broadcasting binary spectrum op.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* what) {
  Shape out = a;
  for (std::size_t i = 1; i < 4; ++i) {
    if (a[i] != b[i]) {
      throw ShapeError(i == 1 ? "channels" : "spatial", std::string(what) + ": shapes " +
                                                            shape_string(a) + " and " + shape_string(b) +
                                                            " are not broadcast-compatible");
    }
  }
  if (a[0] != b[0]) {
    if (a[0] != 1 && b[0] != 1) {
      throw ShapeError("batch", std::string(what) + ": batch extents " + std::to_string(a[0]) +
                                    " and " + std::to_string(b[0]) + " cannot broadcast");
    }
    out[0] = std::max(a[0], b[0]);
  }
  return out;
}

// Index into an operand that may be batch-broadcast.
inline std::size_t bidx(const Shape& operand, std::size_t i, std::size_t per_batch) {
  return operand[0] == 1 ? i % per_batch : i;
}

// Sums a full-batch gradient down to the operand's shape.
ComplexSpectrum reduce_to(const ComplexSpectrum& grad, const Shape& target) {
  if (grad.shape() == target) return grad;
  ComplexSpectrum out(target);
  const std::size_t per = out.numel();
  for (std::size_t i = 0; i < grad.numel(); ++i) out[i % per] += grad[i];
  return out;
}

template <typename Fn>
Var complex_binary(const char* op, const Var& a, const Var& b, Fn forward,
                   std::function<std::pair<Complex, Complex>(Complex g, Complex x, Complex y)> grad) {
  const ComplexSpectrum& za = a.spectrum();
  const ComplexSpectrum& zb = b.spectrum();
  const Shape shape = broadcast_shape(za.shape(), zb.shape(), op);
  const std::size_t per = shape[1] * shape[2] * shape[3];
  ComplexSpectrum out(shape, promote(za.dtype(), zb.dtype()));
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = forward(za[bidx(za.shape(), i, per)], zb[bidx(zb.shape(), i, per)]);
  }
  out.round_to_dtype();
  return record(op, std::move(out), {a, b}, [a, b, shape, per, grad](const Value& g) {
    const auto& gz = as_spectrum(g);
    const ComplexSpectrum& xa = a.spectrum();
    const ComplexSpectrum& xb = b.spectrum();
    ComplexSpectrum ga(shape), gb(shape);
    for (std::size_t i = 0; i < gz.numel(); ++i) {
      auto [da, db] = grad(gz[i], xa[bidx(xa.shape(), i, per)], xb[bidx(xb.shape(), i, per)]);
      ga[i] = da;
      gb[i] = db;
    }
    return std::vector<Value>{reduce_to(ga, xa.shape()), reduce_to(gb, xb.shape())};
  });
}

void require_channel_vector(const Tensor& p, std::size_t channels, const char* what) {
  if (p.shape() != Shape{channels}) {
    throw ShapeError("channels", std::string(what) + ": per-channel vector must have " +
                                     std::to_string(channels) + " entries, got " + shape_string(p.shape()));
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const std::optional<Var>& bias, const Conv2dOptions& options) {
  Tensor out = dfir::conv2d(x.tensor(), weight.tensor(), bias ? bias->tensor() : Tensor{}, options);
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return record("conv2d", std::move(out), inputs, [x, weight, has_bias, options](const Value& g) {
    Conv2dGrads grads = conv2d_backward(x.tensor(), weight.tensor(), has_bias, as_tensor(g), options);
    std::vector<Value> result{std::move(grads.input), std::move(grads.weight)};
    if (has_bias) result.emplace_back(std::move(grads.bias));
    return result;
  });
}

Var gelu(const Var& x) {
  return record("gelu", dfir::gelu(x.tensor()), {x}, [x](const Value& g) {
    const Tensor& in = x.tensor();
    Tensor gi(in.shape());
    for (std::size_t i = 0; i < in.numel(); ++i) gi[i] = as_tensor(g)[i] * gelu_derivative(in[i]);
    return std::vector<Value>{std::move(gi)};
  });
}

Var sigmoid(const Var& x) {
  Tensor out = dfir::sigmoid(x.tensor());
  Tensor y = out;
  return record("sigmoid", std::move(out), {x}, [y](const Value& g) {
    Tensor gi(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) gi[i] = as_tensor(g)[i] * y[i] * (1.0 - y[i]);
    return std::vector<Value>{std::move(gi)};
  });
}

Var add(const Var& a, const Var& b) {
  return record("add", dfir::add(a.tensor(), b.tensor()), {a, b},
                [](const Value& g) { return std::vector<Value>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  return record("sub", dfir::sub(a.tensor(), b.tensor()), {a, b}, [](const Value& g) {
    return std::vector<Value>{g, dfir::scale(as_tensor(g), -1.0)};
  });
}

Var mul(const Var& a, const Var& b) {
  return record("mul", dfir::mul(a.tensor(), b.tensor()), {a, b}, [a, b](const Value& g) {
    return std::vector<Value>{dfir::mul(as_tensor(g), b.tensor()), dfir::mul(as_tensor(g), a.tensor())};
  });
}

Var scale(const Var& x, double factor) {
  return record("scale", dfir::scale(x.tensor(), factor), {x}, [factor](const Value& g) {
    return std::vector<Value>{dfir::scale(as_tensor(g), factor)};
  });
}

Var add_scalar(const Var& x, double offset) {
  Tensor out = x.tensor().to(DType::f64);
  for (double& v : out.data()) v += offset;
  out.set_dtype(x.tensor().dtype());
  return record("add_scalar", std::move(out), {x}, [](const Value& g) { return std::vector<Value>{g}; });
}

Var sum(const Var& x) {
  const Shape shape = x.tensor().shape();
  return record("sum", Tensor::scalar(dfir::sum(x.tensor())), {x}, [shape](const Value& g) {
    return std::vector<Value>{Tensor::full(shape, as_tensor(g)[0])};
  });
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  const Tensor& in = x.tensor();
  if (weights.shape() != in.shape()) {
    throw ShapeError("weights", "weighted_sum: weights " + shape_string(weights.shape()) +
                                    " do not match " + shape_string(in.shape()));
  }
  // Correctly rounded dot product: each product splits exactly into p + e.
  std::vector<double> terms;
  terms.reserve(2 * in.numel());
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const double p = weights[i] * in[i];
    terms.push_back(p);
    terms.push_back(std::fma(weights[i], in[i], -p));
  }
  return record("weighted_sum", Tensor::scalar(exact_sum(terms)), {x}, [weights](const Value& g) {
    return std::vector<Value>{dfir::scale(weights, as_tensor(g)[0])};
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.tensor());
  std::vector<std::size_t> widths;
  for (const Tensor& t : values) widths.push_back(t.channels());
  return record("concat_channels", dfir::concat_channels(values), parts, [widths](const Value& g) {
    std::vector<Value> grads;
    std::size_t start = 0;
    for (std::size_t w : widths) {
      grads.emplace_back(dfir::slice_channels(as_tensor(g), start, w));
      start += w;
    }
    return grads;
  });
}

Var slice_channels(const Var& x, std::size_t start, std::size_t count) {
  const Shape shape = x.tensor().shape();
  return record("slice_channels", dfir::slice_channels(x.tensor(), start, count), {x},
                [shape, start, count](const Value& g) {
                  Tensor gi(shape);
                  const Tensor& go = as_tensor(g);
                  const std::size_t plane = shape[2] * shape[3];
                  for (std::size_t b = 0; b < shape[0]; ++b) {
                    std::copy_n(go.data().data() + b * count * plane, count * plane,
                                gi.data().data() + (b * shape[1] + start) * plane);
                  }
                  return std::vector<Value>{std::move(gi)};
                });
}

Var group_norm(const Var& x, const Var& gain, const Var& shift, std::size_t num_groups, double eps) {
  NormSpec spec;
  spec.kind = NormKind::group_norm;
  spec.num_groups = num_groups;
  spec.eps = eps;
  spec.gain = gain.tensor();
  spec.shift = shift.tensor();
  Tensor out = dfir::group_norm(x.tensor(), spec);
  return record("group_norm", std::move(out), {x, gain, shift}, [x, gain, num_groups, eps](const Value& g) {
    const Tensor& in = x.tensor();
    const Tensor& gamma = gain.tensor();
    const Tensor& go = as_tensor(g);
    const std::size_t C = in.channels();
    const std::size_t per_group = C / num_groups;
    const std::size_t plane = in.height() * in.width();
    const std::size_t count = per_group * plane;
    Tensor gx(in.shape()), gg(gamma.shape()), gb(gamma.shape());
    std::vector<double> xhat(count), dxhat(count);
    for (std::size_t b = 0; b < in.batch(); ++b) {
      for (std::size_t grp = 0; grp < num_groups; ++grp) {
        const std::size_t base = (b * C + grp * per_group) * plane;
        double mean = 0.0;
        for (std::size_t i = 0; i < count; ++i) mean += in[base + i];
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (std::size_t i = 0; i < count; ++i) var += (in[base + i] - mean) * (in[base + i] - mean);
        var /= static_cast<double>(count);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t c = grp * per_group + i / plane;
          xhat[i] = (in[base + i] - mean) * inv_std;
          dxhat[i] = go[base + i] * gamma[c];
          gg[c] += go[base + i] * xhat[i];
          gb[c] += go[base + i];
          sum_d += dxhat[i];
          sum_dx += dxhat[i] * xhat[i];
        }
        const double m = static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i) {
          gx[base + i] = inv_std / m * (m * dxhat[i] - sum_d - xhat[i] * sum_dx);
        }
      }
    }
    return std::vector<Value>{std::move(gx), std::move(gg), std::move(gb)};
  });
}

Var channel_affine(const Var& x, const Var& gain, const Var& shift) {
  Tensor out = dfir::channel_affine(x.tensor(), gain.tensor(), shift.tensor());
  return record("channel_affine", std::move(out), {x, gain, shift}, [x, gain](const Value& g) {
    const Tensor& in = x.tensor();
    const Tensor& gamma = gain.tensor();
    const Tensor& go = as_tensor(g);
    const std::size_t plane = in.height() * in.width();
    Tensor gx(in.shape()), gg(gamma.shape()), gb(gamma.shape());
    for (std::size_t bc = 0; bc < in.batch() * in.channels(); ++bc) {
      const std::size_t c = bc % in.channels();
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t idx = bc * plane + i;
        gx[idx] = go[idx] * gamma[c];
        gg[c] += go[idx] * in[idx];
        gb[c] += go[idx];
      }
    }
    return std::vector<Value>{std::move(gx), std::move(gg), std::move(gb)};
  });
}

Var nearest_upsample(const Var& x, std::size_t s) {
  const Shape shape = x.tensor().shape();
  return record("nearest_upsample", dfir::nearest_upsample(x.tensor(), s), {x}, [shape, s](const Value& g) {
    const Tensor& go = as_tensor(g);
    Tensor gi(shape);
    for (std::size_t b = 0; b < shape[0]; ++b)
      for (std::size_t c = 0; c < shape[1]; ++c)
        for (std::size_t h = 0; h < shape[2] * s; ++h)
          for (std::size_t w = 0; w < shape[3] * s; ++w) gi.at(b, c, h / s, w / s) += go.at(b, c, h, w);
    return std::vector<Value>{std::move(gi)};
  });
}

Var zero_insert_upsample(const Var& x, std::size_t s) {
  const Shape shape = x.tensor().shape();
  return record("zero_insert_upsample", dfir::zero_insert_upsample(x.tensor(), s), {x},
                [shape, s](const Value& g) {
                  const Tensor& go = as_tensor(g);
                  Tensor gi(shape);
                  for (std::size_t b = 0; b < shape[0]; ++b)
                    for (std::size_t c = 0; c < shape[1]; ++c)
                      for (std::size_t h = 0; h < shape[2]; ++h)
                        for (std::size_t w = 0; w < shape[3]; ++w) gi.at(b, c, h, w) = go.at(b, c, h * s, w * s);
                  return std::vector<Value>{std::move(gi)};
                });
}

Var channel_shuffle(const Var& x) {
  return record("channel_shuffle", dfir::channel_shuffle(x.tensor()), {x}, [](const Value& g) {
    const Tensor& go = as_tensor(g);
    const std::size_t C = go.channels(), half = C / 2;
    const std::size_t plane = go.height() * go.width();
    Tensor gi(go.shape());
    for (std::size_t b = 0; b < go.batch(); ++b)
      for (std::size_t grp = 0; grp < 2; ++grp)
        for (std::size_t j = 0; j < half; ++j)
          std::copy_n(go.data().data() + (b * C + j * 2 + grp) * plane, plane,
                      gi.data().data() + (b * C + grp * half + j) * plane);
    return std::vector<Value>{std::move(gi)};
  });
}

Var global_avg_pool(const Var& x) {
  const Shape shape = x.tensor().shape();
  return record("global_avg_pool", dfir::global_avg_pool(x.tensor()), {x}, [shape](const Value& g) {
    const Tensor& go = as_tensor(g);
    const std::size_t plane = shape[2] * shape[3];
    Tensor gi(shape);
    for (std::size_t bc = 0; bc < shape[0] * shape[1]; ++bc)
      for (std::size_t i = 0; i < plane; ++i) gi[bc * plane + i] = go[bc] / static_cast<double>(plane);
    return std::vector<Value>{std::move(gi)};
  });
}

Var masked_softmax(const Var& logits, const KeepSets& keep) {
  Tensor out = dfir::masked_softmax(logits.tensor(), keep);
  Tensor y = out;
  return record("masked_softmax", std::move(out), {logits}, [y, keep](const Value& g) {
    const Tensor& go = as_tensor(g);
    const std::size_t cols = y.shape().back();
    Tensor gi(y.shape());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      const std::size_t base = r * cols;
      double dot = 0.0;
      for (std::size_t j : keep[r]) dot += y[base + j] * go[base + j];
      for (std::size_t j : keep[r]) gi[base + j] = y[base + j] * (go[base + j] - dot);
    }
    return std::vector<Value>{std::move(gi)};
  });
}

Var dropout(const Var& x, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout: p must lie in [0, 1)");
  if (p == 0.0) return x;
  Rng rng(seed);
  Tensor mask(x.tensor().shape());
  for (double& m : mask.data()) m = rng.uniform01() < p ? 0.0 : 1.0 / (1.0 - p);
  return record("dropout", dfir::mul(x.tensor(), mask), {x}, [mask](const Value& g) {
    return std::vector<Value>{dfir::mul(as_tensor(g), mask)};
  });
}

Var mul_channel(const Var& x, const Var& per_channel) {
  const Tensor& in = x.tensor();
  require_rank4(in, "mul_channel");
  require_channel_vector(per_channel.tensor(), in.channels(), "mul_channel");
  Tensor zero(per_channel.tensor().shape());
  Tensor out = dfir::channel_affine(in, per_channel.tensor(), zero);
  return record("mul_channel", std::move(out), {x, per_channel}, [x, per_channel](const Value& g) {
    const Tensor& xin = x.tensor();
    const Tensor& p = per_channel.tensor();
    const Tensor& go = as_tensor(g);
    const std::size_t plane = xin.height() * xin.width();
    Tensor gx(xin.shape()), gp(p.shape());
    for (std::size_t bc = 0; bc < xin.batch() * xin.channels(); ++bc) {
      const std::size_t c = bc % xin.channels();
      for (std::size_t i = 0; i < plane; ++i) {
        gx[bc * plane + i] = go[bc * plane + i] * p[c];
        gp[c] += go[bc * plane + i] * xin[bc * plane + i];
      }
    }
    return std::vector<Value>{std::move(gx), std::move(gp)};
  });
}

Var fft2(const Var& x) {
  return record("fft2", dfir::fft2(x.tensor()), {x}, [](const Value& g) {
    const auto& gz = as_spectrum(g);
    ComplexSpectrum back = ifft2_complex(gz);
    const double n = static_cast<double>(gz.height() * gz.width());
    Tensor gi(gz.shape());
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] = back[i].real() * n;
    return std::vector<Value>{std::move(gi)};
  });
}

Var ifft2_real(const Var& spectrum, double imag_tolerance, const std::string& stage) {
  RealInverse inv = ifft2_with_residue(spectrum.spectrum());
  if (!inv.real.all_finite()) {
    throw NumericError(stage, stage + ": inverse transform produced non-finite values");
  }
  double peak = 1.0;
  for (double v : inv.real.data()) peak = std::max(peak, std::abs(v));
  if (inv.max_imag > imag_tolerance * peak) {
    throw NumericError(stage, stage + ": imaginary residue " + std::to_string(inv.max_imag) +
                                  " exceeds tolerance");
  }
  return record("ifft2_real", std::move(inv.real), {spectrum}, [](const Value& g) {
    const Tensor& go = as_tensor(g);
    ComplexSpectrum gz = dfir::fft2(go);
    const double inv_n = 1.0 / static_cast<double>(go.height() * go.width());
    for (auto& z : gz.data()) z *= inv_n;
    return std::vector<Value>{std::move(gz)};
  });
}

Var c_mul(const Var& a, const Var& b) {
  return complex_binary(
      "c_mul", a, b, [](Complex x, Complex y) { return x * y; },
      [](Complex g, Complex x, Complex y) { return std::pair{g * std::conj(y), g * std::conj(x)}; });
}

Var c_div(const Var& a, const Var& b) {
  return complex_binary(
      "c_div", a, b, [](Complex x, Complex y) { return x / y; },
      [](Complex g, Complex x, Complex y) {
        return std::pair{g / std::conj(y), -g * std::conj(x / (y * y))};
      });
}

Var c_add(const Var& a, const Var& b) {
  return complex_binary(
      "c_add", a, b, [](Complex x, Complex y) { return x + y; },
      [](Complex g, Complex, Complex) { return std::pair{g, g}; });
}

Var c_sub(const Var& a, const Var& b) {
  return complex_binary(
      "c_sub", a, b, [](Complex x, Complex y) { return x - y; },
      [](Complex g, Complex, Complex) { return std::pair{g, -g}; });
}

Var c_conj(const Var& a) {
  ComplexSpectrum out = a.spectrum();
  for (auto& z : out.data()) z = std::conj(z);
  return record("c_conj", std::move(out), {a}, [](const Value& g) {
    ComplexSpectrum gz = as_spectrum(g);
    for (auto& z : gz.data()) z = std::conj(z);
    return std::vector<Value>{std::move(gz)};
  });
}

Var c_abs2(const Var& a) {
  ComplexSpectrum out = a.spectrum();
  for (auto& z : out.data()) z = std::norm(z);
  out.round_to_dtype();
  return record("c_abs2", std::move(out), {a}, [a](const Value& g) {
    const auto& gz = as_spectrum(g);
    const ComplexSpectrum& x = a.spectrum();
    ComplexSpectrum ga(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) ga[i] = 2.0 * gz[i].real() * x[i];
    return std::vector<Value>{std::move(ga)};
  });
}

Var c_add_channel(const Var& z, const Var& per_channel) {
  const ComplexSpectrum& in = z.spectrum();
  const Tensor& p = per_channel.tensor();
  require_channel_vector(p, in.channels(), "c_add_channel");
  const std::size_t plane = in.height() * in.width();
  ComplexSpectrum out = in;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += p[(i / plane) % in.channels()];
  out.round_to_dtype();
  return record("c_add_channel", std::move(out), {z, per_channel}, [per_channel, plane](const Value& g) {
    const auto& gz = as_spectrum(g);
    Tensor gp(per_channel.tensor().shape());
    for (std::size_t i = 0; i < gz.numel(); ++i) gp[(i / plane) % gz.channels()] += gz[i].real();
    return std::vector<Value>{gz, std::move(gp)};
  });
}

Var c_div_channel(const Var& z, const Var& per_channel) {
  const ComplexSpectrum& in = z.spectrum();
  const Tensor& p = per_channel.tensor();
  require_channel_vector(p, in.channels(), "c_div_channel");
  const std::size_t plane = in.height() * in.width();
  ComplexSpectrum out = in;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= p[(i / plane) % in.channels()];
  out.round_to_dtype();
  return record("c_div_channel", std::move(out), {z, per_channel}, [z, per_channel, plane](const Value& g) {
    const auto& gz = as_spectrum(g);
    const ComplexSpectrum& x = z.spectrum();
    const Tensor& pc = per_channel.tensor();
    ComplexSpectrum gx(x.shape());
    Tensor gp(pc.shape());
    for (std::size_t i = 0; i < gz.numel(); ++i) {
      const double d = pc[(i / plane) % gz.channels()];
      gx[i] = gz[i] / d;
      gp[(i / plane) % gz.channels()] -= (std::conj(gz[i]) * x[i]).real() / (d * d);
    }
    return std::vector<Value>{std::move(gx), std::move(gp)};
  });
}

Var block_avg_spectrum(const Var& z, std::size_t s) {
  return record("block_avg_spectrum", dfir::block_avg_spectrum(z.spectrum(), s), {z}, [s](const Value& g) {
    ComplexSpectrum gz = dfir::repeat_spectrum(as_spectrum(g), s);
    const double inv = 1.0 / static_cast<double>(s * s);
    for (auto& v : gz.data()) v *= inv;
    return std::vector<Value>{std::move(gz)};
  });
}

Var repeat_spectrum(const Var& z, std::size_t s) {
  return record("repeat_spectrum", dfir::repeat_spectrum(z.spectrum(), s), {z}, [s](const Value& g) {
    ComplexSpectrum gz = dfir::block_avg_spectrum(as_spectrum(g), s);
    const double factor = static_cast<double>(s * s);
    for (auto& v : gz.data()) v *= factor;
    return std::vector<Value>{std::move(gz)};
  });
}

Var pad_roll_kernel(const Var& taps, std::size_t height, std::size_t width) {
  const Tensor& k = taps.tensor();
  if (k.rank() != 3 || k.dim(1) != k.dim(2) || k.dim(1) % 2 == 0) {
    throw ShapeError("kernel", "pad_roll_kernel: taps must be (C, k, k) with odd k, got " +
                                   shape_string(k.shape()));
  }
  const std::size_t C = k.dim(0), ks = k.dim(1), half = ks / 2;
  if (ks > height || ks > width) {
    throw ShapeError(ks > height ? "height" : "width",
                     "pad_roll_kernel: kernel size " + std::to_string(ks) + " exceeds extent " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  auto target = [=](std::size_t a, std::size_t b) {
    return std::pair{(a + height - half) % height, (b + width - half) % width};
  };
  Tensor canvas({1, C, height, width}, k.dtype());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t a = 0; a < ks; ++a)
      for (std::size_t b = 0; b < ks; ++b) {
        auto [u, v] = target(a, b);
        canvas.at(0, c, u, v) = k[(c * ks + a) * ks + b];
      }
  const Shape shape = k.shape();
  return record("pad_roll_kernel", std::move(canvas), {taps}, [shape, target](const Value& g) {
    const Tensor& go = as_tensor(g);
    const std::size_t C = shape[0], ks = shape[1];
    Tensor gk(shape);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t a = 0; a < ks; ++a)
        for (std::size_t b = 0; b < ks; ++b) {
          auto [u, v] = target(a, b);
          gk[(c * ks + a) * ks + b] = go.at(0, c, u, v);
        }
    return std::vector<Value>{std::move(gk)};
  });
}

}  // namespace dfir::ad
