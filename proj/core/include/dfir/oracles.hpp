#pragma once

#include <vector>

#include "dfir/firc3.hpp"
#include "dfir/tensor.hpp"

// Brute-force references. None of these share code with the optimized paths
// they check beyond elementwise arithmetic: no FFTW, no im2col tables, no
// Top-K selection. Everything runs in f64.
namespace dfir::oracle {

// softmax(Q K^T / sqrt(d)) V with explicit loops; Q, K (N, d), V (N, dv).
Tensor dense_attention_reference(const Tensor& q, const Tensor& k, const Tensor& v);

// Spatial circular convolution of x (B, C, H, W) with depthwise taps (C, k, k)
// centred on the middle tap, by modular indexing.
Tensor circular_conv2d_reference(const Tensor& x, const Tensor& taps);

// Unnormalized 2-D DFT of every plane, computed separably from the definition.
ComplexSpectrum naive_dft2(const ComplexSpectrum& x);
ComplexSpectrum naive_dft2(const Tensor& x);
// Inverse with the 1/(HW) factor.
ComplexSpectrum naive_idft2(const ComplexSpectrum& x);

// Real part of F^-1[(conj(KF) + eps_b) F[x] / (|KF|^2 + eps_b)], with KF the
// transform of the kernel taps placed centre-at-origin on x's grid.
Tensor firc_closed_form_reference(const Tensor& x, const PeriodizedKernel& kernel, const std::vector<double>& eps_b);

// Cross-correlation conv2d with zero padding by direct summation; weight
// (O, I/groups, k, k), bias (O) or undefined.
Tensor conv2d_reference(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t groups);

}  // namespace dfir::oracle
