#pragma once

#include "dfir/tensor.hpp"

namespace dfir {

// 2-D discrete Fourier transforms over the last two axes of a (B, C, H, W)
// tensor. Forward is unnormalized; inverse carries the 1/(H*W) factor.
// Any extent is supported (FFTW handles non-power-of-two sizes).
ComplexSpectrum fft2(const Tensor& x);
ComplexSpectrum fft2(const ComplexSpectrum& x);
ComplexSpectrum ifft2_complex(const ComplexSpectrum& spectrum);

// Real part of the inverse transform.
Tensor ifft2(const ComplexSpectrum& spectrum);

// Real part of the inverse transform plus the largest imaginary magnitude that
// was discarded.
struct RealInverse {
  Tensor real;
  double max_imag = 0.0;
};
RealInverse ifft2_with_residue(const ComplexSpectrum& spectrum);

}  // namespace dfir
