#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dfir/ops.hpp"

namespace dfir {
namespace {

Tensor unary(const Tensor& x, double (*fn)(double)) {
  Tensor out(x.shape(), DType::f64);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
  out.set_dtype(x.dtype());
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape", std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                                  shape_string(b.shape()) + " differ");
  }
}

template <typename Fn>
Tensor binary(const Tensor& a, const Tensor& b, const char* what, Fn fn) {
  require_same_shape(a, b, what);
  Tensor out(a.shape(), DType::f64);
  auto pa = a.data();
  auto pb = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = fn(pa[i], pb[i]);
  out.set_dtype(promote(a.dtype(), b.dtype()));
  return out;
}

void require_factor(std::size_t s, const char* what) {
  if (s < 1) throw ShapeError("scale", std::string(what) + ": scale factor must be >= 1");
}

void require_per_channel(const Tensor& p, std::size_t channels, const char* name) {
  if (!p.defined() || p.shape() != Shape{channels}) {
    throw ShapeError(name, std::string(name) + " must have one entry per channel (" +
                               std::to_string(channels) + ")");
  }
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor gelu(const Tensor& x) { return unary(x, static_cast<double (*)(double)>(&gelu)); }
Tensor sigmoid(const Tensor& x) { return unary(x, static_cast<double (*)(double)>(&sigmoid)); }

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "add", [](double u, double v) { return u + v; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, "sub", [](double u, double v) { return u - v; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "mul", [](double u, double v) { return u * v; });
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = x.to(DType::f64);
  for (double& v : out.data()) v *= factor;
  out.set_dtype(x.dtype());
  return out;
}

Tensor masked_softmax(const Tensor& logits, const KeepSets& keep) {
  if (!logits.defined()) throw ShapeError("logits", "masked_softmax: undefined logits");
  const std::size_t cols = logits.shape().back();
  const std::size_t rows = logits.numel() / cols;
  if (keep.size() != rows) {
    throw ShapeError("rows", "masked_softmax: " + std::to_string(keep.size()) + " keep sets for " +
                                 std::to_string(rows) + " rows");
  }
  Tensor out(logits.shape(), DType::f64);
  auto src = logits.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& set = keep[r];
    if (set.empty()) throw Error("masked_softmax: row " + std::to_string(r) + " has an empty keep set");
    const double* row = src.data() + r * cols;
    double* orow = dst.data() + r * cols;
    double peak = -INFINITY;
    for (std::size_t j : set) {
      if (j >= cols) {
        throw ShapeError("keep", "masked_softmax: keep index " + std::to_string(j) +
                                     " out of range for " + std::to_string(cols) + " columns");
      }
      peak = std::max(peak, row[j]);
    }
    double total = 0.0;
    for (std::size_t j : set) total += std::exp(row[j] - peak);
    for (std::size_t j : set) orow[j] = std::exp(row[j] - peak) / total;
  }
  out.set_dtype(logits.dtype());
  return out;
}

std::size_t default_num_groups(std::size_t channels) {
  for (std::size_t g = std::min<std::size_t>(16, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

NormSpec make_group_norm(std::size_t channels, std::size_t num_groups, double eps) {
  NormSpec spec;
  spec.kind = NormKind::group_norm;
  spec.num_groups = num_groups == 0 ? default_num_groups(channels) : num_groups;
  spec.eps = eps;
  spec.gain = Tensor::full({channels}, 1.0);
  spec.shift = Tensor({channels});
  return spec;
}

Tensor group_norm(const Tensor& x, const NormSpec& spec) {
  require_rank4(x, "group_norm");
  const std::size_t C = x.channels();
  if (spec.num_groups < 1 || C % spec.num_groups != 0) {
    throw ShapeError("num_groups", "group_norm: num_groups=" + std::to_string(spec.num_groups) +
                                       " must divide C=" + std::to_string(C));
  }
  if (!(spec.eps > 0)) throw Error("group_norm: eps must be positive");
  require_per_channel(spec.gain, C, "gain");
  require_per_channel(spec.shift, C, "shift");

  const std::size_t per_group = C / spec.num_groups;
  const std::size_t plane = x.height() * x.width();
  const std::size_t count = per_group * plane;
  Tensor out(x.shape(), DType::f64);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t g = 0; g < spec.num_groups; ++g) {
      const std::size_t base = (b * C + g * per_group) * plane;
      double mean = 0.0;
      for (std::size_t i = 0; i < count; ++i) mean += src[base + i];
      mean /= static_cast<double>(count);
      double var = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const double d = src[base + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(count);
      const double inv_std = 1.0 / std::sqrt(var + spec.eps);
      for (std::size_t cg = 0; cg < per_group; ++cg) {
        const std::size_t c = g * per_group + cg;
        const double gain = spec.gain[c];
        const double shift = spec.shift[c];
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t idx = base + cg * plane + i;
          dst[idx] = (src[idx] - mean) * inv_std * gain + shift;
        }
      }
    }
  }
  out.set_dtype(x.dtype());
  return out;
}

Tensor channel_affine(const Tensor& x, const Tensor& gain, const Tensor& shift) {
  require_rank4(x, "channel_affine");
  require_per_channel(gain, x.channels(), "gain");
  require_per_channel(shift, x.channels(), "shift");
  Tensor out(x.shape(), DType::f64);
  const std::size_t plane = x.height() * x.width();
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t bc = 0; bc < x.batch() * x.channels(); ++bc) {
    const std::size_t c = bc % x.channels();
    for (std::size_t i = 0; i < plane; ++i) dst[bc * plane + i] = src[bc * plane + i] * gain[c] + shift[c];
  }
  out.set_dtype(x.dtype());
  return out;
}

Tensor normalize(const Tensor& x, const NormSpec& spec) {
  return spec.kind == NormKind::group_norm ? group_norm(x, spec)
                                           : channel_affine(x, spec.gain, spec.shift);
}

Tensor nearest_upsample(const Tensor& x, std::size_t s) {
  require_rank4(x, "nearest_upsample");
  require_factor(s, "nearest_upsample");
  const std::size_t H = x.height(), W = x.width();
  Tensor out({x.batch(), x.channels(), H * s, W * s}, x.dtype());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t h = 0; h < H * s; ++h)
        for (std::size_t w = 0; w < W * s; ++w) out.at(b, c, h, w) = x.at(b, c, h / s, w / s);
  return out;
}

Tensor zero_insert_upsample(const Tensor& x, std::size_t s) {
  require_rank4(x, "zero_insert_upsample");
  require_factor(s, "zero_insert_upsample");
  Tensor out({x.batch(), x.channels(), x.height() * s, x.width() * s}, x.dtype());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t h = 0; h < x.height(); ++h)
        for (std::size_t w = 0; w < x.width(); ++w) out.at(b, c, h * s, w * s) = x.at(b, c, h, w);
  return out;
}

Tensor channel_shuffle(const Tensor& x) {
  require_rank4(x, "channel_shuffle");
  const std::size_t C = x.channels();
  if (C % 2 != 0) {
    throw ShapeError("channels", "channel_shuffle needs an even channel count, got " + std::to_string(C));
  }
  const std::size_t half = C / 2;
  const std::size_t plane = x.height() * x.width();
  Tensor out(x.shape(), x.dtype());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t j = 0; j < half; ++j) {
        const double* from = src.data() + (b * C + g * half + j) * plane;
        double* to = dst.data() + (b * C + j * 2 + g) * plane;
        std::copy_n(from, plane, to);
      }
    }
  }
  return out;
}

ComplexSpectrum block_avg_spectrum(const ComplexSpectrum& spectrum, std::size_t s) {
  require_factor(s, "block_avg_spectrum");
  const std::size_t H = spectrum.height(), W = spectrum.width();
  if (H % s != 0 || W % s != 0) {
    throw ShapeError(H % s != 0 ? "height" : "width",
                     "block_avg_spectrum: s=" + std::to_string(s) + " must divide extent " +
                         shape_string(spectrum.shape()));
  }
  const std::size_t h = H / s, w = W / s;
  ComplexSpectrum out({spectrum.batch(), spectrum.channels(), h, w}, spectrum.dtype());
  std::vector<double> re(s * s), im(s * s);
  for (std::size_t b = 0; b < spectrum.batch(); ++b)
    for (std::size_t c = 0; c < spectrum.channels(); ++c)
      for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) {
          for (std::size_t m = 0; m < s; ++m)
            for (std::size_t n = 0; n < s; ++n) {
              const auto z = spectrum.at(b, c, u + m * h, v + n * w);
              re[m * s + n] = z.real();
              im[m * s + n] = z.imag();
            }
          out.at(b, c, u, v) = {exact_mean(re), exact_mean(im)};
        }
  out.round_to_dtype();
  return out;
}

ComplexSpectrum repeat_spectrum(const ComplexSpectrum& spectrum, std::size_t s) {
  require_factor(s, "repeat_spectrum");
  const std::size_t h = spectrum.height(), w = spectrum.width();
  ComplexSpectrum out({spectrum.batch(), spectrum.channels(), h * s, w * s}, spectrum.dtype());
  for (std::size_t b = 0; b < spectrum.batch(); ++b)
    for (std::size_t c = 0; c < spectrum.channels(); ++c)
      for (std::size_t u = 0; u < h * s; ++u)
        for (std::size_t v = 0; v < w * s; ++v) out.at(b, c, u, v) = spectrum.at(b, c, u % h, v % w);
  return out;
}

Tensor avg_pool(const Tensor& x, std::size_t s) {
  require_rank4(x, "avg_pool");
  require_factor(s, "avg_pool");
  if (x.height() % s != 0 || x.width() % s != 0) {
    throw ShapeError(x.height() % s != 0 ? "height" : "width",
                     "avg_pool: window " + std::to_string(s) + " must divide " + shape_string(x.shape()));
  }
  const std::size_t h = x.height() / s, w = x.width() / s;
  Tensor out({x.batch(), x.channels(), h, w}, DType::f64);
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          double acc = 0.0;
          for (std::size_t m = 0; m < s; ++m)
            for (std::size_t n = 0; n < s; ++n) acc += x.at(b, c, i * s + m, j * s + n);
          out.at(b, c, i, j) = acc * inv;
        }
  out.set_dtype(x.dtype());
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank4(x, "global_avg_pool");
  Tensor out({x.batch(), x.channels(), 1, 1}, DType::f64);
  const std::size_t plane = x.height() * x.width();
  auto src = x.data();
  for (std::size_t bc = 0; bc < x.batch() * x.channels(); ++bc) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += src[bc * plane + i];
    out[bc] = acc / static_cast<double>(plane);
  }
  out.set_dtype(x.dtype());
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("parts", "concat_channels: nothing to concatenate");
  const Tensor& first = parts.front();
  require_rank4(first, "concat_channels");
  std::size_t total = 0;
  DType dtype = first.dtype();
  for (const Tensor& p : parts) {
    require_rank4(p, "concat_channels");
    if (p.batch() != first.batch() || p.height() != first.height() || p.width() != first.width()) {
      throw ShapeError(p.batch() != first.batch() ? "batch" : "spatial",
                       "concat_channels: " + shape_string(p.shape()) + " incompatible with " +
                           shape_string(first.shape()));
    }
    total += p.channels();
    dtype = promote(dtype, p.dtype());
  }
  Tensor out({first.batch(), total, first.height(), first.width()}, dtype);
  const std::size_t plane = first.height() * first.width();
  auto dst = out.data();
  for (std::size_t b = 0; b < first.batch(); ++b) {
    std::size_t c0 = 0;
    for (const Tensor& p : parts) {
      const std::size_t n = p.channels() * plane;
      std::copy_n(p.data().data() + b * n, n, dst.data() + (b * total + c0) * plane);
      c0 += p.channels();
    }
  }
  return out;
}

Tensor slice_channels(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank4(x, "slice_channels");
  if (count == 0 || start + count > x.channels()) {
    throw ShapeError("channels", "slice_channels: [" + std::to_string(start) + ", " +
                                     std::to_string(start + count) + ") outside " +
                                     std::to_string(x.channels()) + " channels");
  }
  Tensor out({x.batch(), count, x.height(), x.width()}, x.dtype());
  const std::size_t plane = x.height() * x.width();
  for (std::size_t b = 0; b < x.batch(); ++b) {
    std::copy_n(x.data().data() + (b * x.channels() + start) * plane, count * plane,
                out.data().data() + b * count * plane);
  }
  return out;
}

Tensor roll(const Tensor& x, long dy, long dx) {
  require_rank4(x, "roll");
  const long H = static_cast<long>(x.height()), W = static_cast<long>(x.width());
  Tensor out(x.shape(), x.dtype());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (long h = 0; h < H; ++h)
        for (long w = 0; w < W; ++w) {
          const long sh = (((h - dy) % H) + H) % H;
          const long sw = (((w - dx) % W) + W) % W;
          out.at(b, c, h, w) = x.at(b, c, sh, sw);
        }
  return out;
}

double exact_sum(std::span<const double> values) {
  std::vector<double> partials;
  for (double x : values) {
    std::size_t i = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  if (partials.empty()) return 0.0;
  std::size_t n = partials.size();
  double hi = partials[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials[--n];
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) break;
  }
  // Round-half-even correction when the remaining partials push past a tie.
  if (n > 0 && ((lo < 0 && partials[n - 1] < 0) || (lo > 0 && partials[n - 1] > 0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

double exact_mean(std::span<const double> values) {
  if (values.empty()) throw Error("exact_mean of an empty range");
  const double n = static_cast<double>(values.size());
  const double q = exact_sum(values) / n;
  // sum - n * q evaluated exactly: -n * q splits into p + e with no rounding.
  std::vector<double> terms(values.begin(), values.end());
  const double p = -n * q;
  terms.push_back(p);
  terms.push_back(std::fma(-n, q, -p));
  return q + exact_sum(terms) / n;
}

double l1_norm(const Tensor& x) {
  std::vector<double> mags(x.numel());
  auto src = x.data();
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(src[i]);
  return exact_sum(mags);
}

double sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (std::isnan(d)) return INFINITY;
    worst = std::max(worst, d);
  }
  return worst;
}

double max_rel_err(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_rel_err");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    const double e = std::abs(a[i] - b[i]) / denom;
    if (std::isnan(e)) return INFINITY;
    worst = std::max(worst, e);
  }
  return worst;
}

double max_rel_err(const ComplexSpectrum& a, const ComplexSpectrum& b) {
  if (a.shape() != b.shape()) throw ShapeError("shape", "max_rel_err: spectrum shapes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    const double e = std::abs(a[i] - b[i]) / denom;
    if (std::isnan(e)) return INFINITY;
    worst = std::max(worst, e);
  }
  return worst;
}

}  // namespace dfir
