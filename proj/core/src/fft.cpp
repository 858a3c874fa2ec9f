#include "dfir/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>

namespace dfir {
namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const noexcept {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

// Transforms every (H, W) plane of `data` in place. The buffer always comes
// from fftw_alloc so alignment, and therefore the chosen codelets, are fixed.
void transform_planes(std::complex<double>* data, std::size_t planes, std::size_t h, std::size_t w,
                      int sign) {
  const std::size_t plane = h * w;
  FftwBuffer buf(fftw_alloc_complex(planes * plane));
  if (!buf) throw Error("fftw_alloc_complex failed");
  std::memcpy(buf.get(), data, planes * plane * sizeof(fftw_complex));

  int n[2] = {static_cast<int>(h), static_cast<int>(w)};
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_many_dft(2, n, static_cast<int>(planes), buf.get(), nullptr, 1,
                                  static_cast<int>(plane), buf.get(), nullptr, 1,
                                  static_cast<int>(plane), sign, FFTW_ESTIMATE));
  }
  if (!plan) throw Error("fftw_plan_many_dft failed");
  fftw_execute(plan.get());
  std::memcpy(data, buf.get(), planes * plane * sizeof(fftw_complex));
}

Shape spectrum_shape(const Tensor& x) {
  require_rank4(x, "fft2");
  return x.shape();
}

}  // namespace

ComplexSpectrum fft2(const Tensor& x) {
  ComplexSpectrum out(spectrum_shape(x), x.dtype());
  auto dst = out.data();
  auto src = x.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = {src[i], 0.0};
  transform_planes(dst.data(), x.batch() * x.channels(), x.height(), x.width(), FFTW_FORWARD);
  out.round_to_dtype();
  return out;
}

ComplexSpectrum fft2(const ComplexSpectrum& x) {
  ComplexSpectrum out = x;
  transform_planes(out.data().data(), x.batch() * x.channels(), x.height(), x.width(), FFTW_FORWARD);
  out.round_to_dtype();
  return out;
}

ComplexSpectrum ifft2_complex(const ComplexSpectrum& spectrum) {
  ComplexSpectrum out = spectrum;
  transform_planes(out.data().data(), spectrum.batch() * spectrum.channels(), spectrum.height(),
                   spectrum.width(), FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(spectrum.height() * spectrum.width());
  for (auto& z : out.data()) z *= scale;
  out.round_to_dtype();
  return out;
}

RealInverse ifft2_with_residue(const ComplexSpectrum& spectrum) {
  ComplexSpectrum full = ifft2_complex(spectrum);
  RealInverse result{Tensor(spectrum.shape(), spectrum.dtype()), 0.0};
  auto dst = result.real.data();
  auto src = full.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = src[i].real();
    result.max_imag = std::max(result.max_imag, std::abs(src[i].imag()));
  }
  return result;
}

Tensor ifft2(const ComplexSpectrum& spectrum) { return ifft2_with_residue(spectrum).real; }

}  // namespace dfir
