#include "dfir/oracles.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace dfir::oracle {
namespace {

using Complex = std::complex<double>;

void require_rank2(const Tensor& t, const char* name) {
  if (!t.defined() || t.rank() != 2) {
    throw ShapeError(name, std::string("dense_attention_reference: ") + name + " must be (N, d)");
  }
}

// Length-n DFT along a strided line, by definition.
void dft_line(Complex* line, std::size_t n, std::size_t stride, int sign, std::vector<Complex>& scratch) {
  scratch.assign(n, Complex{});
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{};
    for (std::size_t j = 0; j < n; ++j) {
      // Reduce the phase index first so large planes keep full accuracy.
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
      acc += line[j * stride] * Complex(std::cos(angle), std::sin(angle));
    }
    scratch[k] = acc;
  }
  for (std::size_t k = 0; k < n; ++k) line[k * stride] = scratch[k];
}

ComplexSpectrum dft2(ComplexSpectrum x, int sign) {
  const std::size_t H = x.height(), W = x.width(), plane = H * W;
  std::vector<Complex> scratch;
  for (std::size_t p = 0; p < x.batch() * x.channels(); ++p) {
    Complex* base = x.data().data() + p * plane;
    for (std::size_t h = 0; h < H; ++h) dft_line(base + h * W, W, 1, sign, scratch);
    for (std::size_t w = 0; w < W; ++w) dft_line(base + w, H, W, sign, scratch);
  }
  return x;
}

ComplexSpectrum kernel_spectrum(const Tensor& taps, std::size_t H, std::size_t W) {
  const std::size_t C = taps.dim(0), k = taps.dim(1), half = k / 2;
  ComplexSpectrum canvas({1, C, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        const std::size_t u = (a + H - half) % H, v = (b + W - half) % W;
        canvas.at(0, c, u, v) += taps[(c * k + a) * k + b];
      }
  return naive_dft2(canvas);
}

}  // namespace

Tensor dense_attention_reference(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_rank2(q, "q");
  require_rank2(k, "k");
  require_rank2(v, "v");
  const std::size_t n = q.dim(0), d = q.dim(1), dv = v.dim(1);
  if (k.dim(0) != n || v.dim(0) != n || k.dim(1) != d) {
    throw ShapeError("tokens", "dense_attention_reference: mismatched token counts or head dims");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out({n, dv});
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    double peak = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += q[i * d + c] * k[j * d + c];
      logits[j] = acc * scale;
      peak = std::max(peak, logits[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      logits[j] = std::exp(logits[j] - peak);
      total += logits[j];
    }
    for (std::size_t c = 0; c < dv; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += logits[j] / total * v[j * dv + c];
      out[i * dv + c] = acc;
    }
  }
  return out;
}

Tensor circular_conv2d_reference(const Tensor& x, const Tensor& taps) {
  require_rank4(x, "circular_conv2d_reference");
  const std::size_t B = x.batch(), C = x.channels(), H = x.height(), W = x.width();
  if (taps.rank() != 3 || taps.dim(0) != C || taps.dim(1) != taps.dim(2) || taps.dim(1) % 2 == 0) {
    throw ShapeError("kernel", "circular_conv2d_reference: taps must be (C, k, k) with odd k");
  }
  const std::size_t k = taps.dim(1);
  const long half = static_cast<long>(k / 2);
  const long Hl = static_cast<long>(H), Wl = static_cast<long>(W);
  auto wrap = [](long i, long n) { return static_cast<std::size_t>(((i % n) + n) % n); };
  Tensor out(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (long h = 0; h < Hl; ++h)
        for (long w = 0; w < Wl; ++w) {
          double acc = 0.0;
          for (long a = 0; a < static_cast<long>(k); ++a)
            for (long bb = 0; bb < static_cast<long>(k); ++bb) {
              const double tap = taps[(c * k + static_cast<std::size_t>(a)) * k + static_cast<std::size_t>(bb)];
              acc += tap * x.at(b, c, wrap(h - (a - half), Hl), wrap(w - (bb - half), Wl));
            }
          out.at(b, c, static_cast<std::size_t>(h), static_cast<std::size_t>(w)) = acc;
        }
  return out;
}

ComplexSpectrum naive_dft2(const ComplexSpectrum& x) { return dft2(x, -1); }

ComplexSpectrum naive_dft2(const Tensor& x) {
  require_rank4(x, "naive_dft2");
  ComplexSpectrum z(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) z[i] = x[i];
  return dft2(std::move(z), -1);
}

ComplexSpectrum naive_idft2(const ComplexSpectrum& x) {
  ComplexSpectrum z = dft2(x, +1);
  const double inv = 1.0 / static_cast<double>(x.height() * x.width());
  for (auto& v : z.data()) v *= inv;
  return z;
}

Tensor firc_closed_form_reference(const Tensor& x, const PeriodizedKernel& kernel,
                                  const std::vector<double>& eps_b) {
  require_rank4(x, "firc_closed_form_reference");
  const std::size_t C = x.channels(), H = x.height(), W = x.width(), plane = H * W;
  if (eps_b.size() != C) throw ShapeError("channels", "firc_closed_form_reference: one eps_b per channel");
  if (kernel.taps.rank() != 3 || kernel.taps.dim(0) != C) {
    throw ShapeError("channels", "firc_closed_form_reference: kernel channels differ from input");
  }
  const ComplexSpectrum kf = kernel_spectrum(kernel.taps, H, W);
  ComplexSpectrum fx = naive_dft2(x);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < plane; ++i) {
        const Complex K = kf[c * plane + i];
        const double e = eps_b[c];
        Complex& z = fx[(b * C + c) * plane + i];
        z = (std::conj(K) + e) * z / (std::norm(K) + e);
      }
  const ComplexSpectrum back = naive_idft2(fx);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = back[i].real();
  return out;
}

Tensor conv2d_reference(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t groups) {
  require_rank4(x, "conv2d_reference");
  const std::size_t B = x.batch(), C = x.channels(), H = x.height(), W = x.width();
  const std::size_t O = weight.dim(0), I = weight.dim(1), k = weight.dim(2);
  if (C != I * groups || O % groups != 0) throw ShapeError("channels", "conv2d_reference: channel/group mismatch");
  const long half = static_cast<long>(k / 2);
  const std::size_t out_per_group = O / groups;
  Tensor out({B, O, H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      const std::size_t g = o / out_per_group;
      for (long h = 0; h < static_cast<long>(H); ++h)
        for (long w = 0; w < static_cast<long>(W); ++w) {
          double acc = bias.defined() ? bias[o] : 0.0;
          for (std::size_t i = 0; i < I; ++i)
            for (long a = 0; a < static_cast<long>(k); ++a)
              for (long bb = 0; bb < static_cast<long>(k); ++bb) {
                const long hh = h + a - half, ww = w + bb - half;
                if (hh < 0 || ww < 0 || hh >= static_cast<long>(H) || ww >= static_cast<long>(W)) continue;
                acc += weight[((o * I + i) * k + static_cast<std::size_t>(a)) * k + static_cast<std::size_t>(bb)] *
                       x.at(b, g * I + i, static_cast<std::size_t>(hh), static_cast<std::size_t>(ww));
              }
          out.at(b, o, static_cast<std::size_t>(h), static_cast<std::size_t>(w)) = acc;
        }
    }
  return out;
}

}  // namespace dfir::oracle
