#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dfir/fft.hpp"
#include "dfir/ops.hpp"
#include "dfir/random.hpp"

using namespace dfir;

namespace {

Tensor plane(std::size_t h, std::size_t w, std::vector<double> values) {
  return Tensor({1, 1, h, w}, std::move(values));
}

}  // namespace

TEST(Conv2d, AllOnesZeroPaddingCountsOverlap) {
  const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor y = conv2d(x, w, Tensor());
  EXPECT_EQ(y.at(0, 0, 1, 1), 9.0);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 0, 2, 2), 4.0);
  EXPECT_EQ(y.at(0, 0, 0, 1), 6.0);
}

TEST(Conv2d, DeltaKernelIsIdentity) {
  const Tensor x = random_tensor({2, 3, 5, 4}, 7);
  Tensor w({3, 1, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) w[c * 9 + 4] = 1.0;
  for (PaddingMode mode : {PaddingMode::zero, PaddingMode::circular}) {
    EXPECT_EQ(conv2d(x, w, Tensor(), {3, mode, 1}), x);
  }
}

TEST(Conv2d, CircularRowSumsEverything) {
  const Tensor x = plane(1, 3, {1, 2, 3});
  const Tensor w = Tensor::full({1, 1, 1, 3}, 1.0);
  const Tensor y = conv2d(x, w, Tensor(), {1, PaddingMode::circular, 1});
  for (double v : y.data()) EXPECT_EQ(v, 6.0);
}

TEST(Conv2d, ChannelMismatchNamesDimension) {
  const Tensor x({1, 3, 4, 4});
  const Tensor w({2, 2, 1, 1});
  try {
    conv2d(x, w, Tensor());
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.dimension(), "in_channels");
  }
}

TEST(Conv2d, RectangularKernelZeroPadding) {
  const Tensor x = plane(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor y = conv2d(x, Tensor::full({1, 1, 1, 3}, 1.0), Tensor());
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{3, 6, 5, 9, 15, 11}));
}

TEST(Conv2d, CircularKernelLargerThanExtentThrows) {
  const Tensor x({1, 1, 2, 2});
  const Tensor w({1, 1, 3, 3});
  EXPECT_THROW(conv2d(x, w, Tensor(), {1, PaddingMode::circular, 1}), ShapeError);
}

TEST(Conv2d, MatchesSpecOverload) {
  Rng rng(3);
  ConvSpec spec;
  spec.in_channels = 4;
  spec.out_channels = 6;
  spec.kernel_size = 3;
  spec.groups = 2;
  spec.weight = random_tensor({6, 2, 3, 3}, rng);
  spec.bias = random_tensor({6}, rng);
  const Tensor x = random_tensor({1, 4, 5, 5}, rng);
  EXPECT_EQ(conv2d(x, spec), conv2d(x, spec.weight, spec.bias, spec.options()));
}

TEST(Gelu, Examples) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(10.0), 10.0, 1e-6);
  EXPECT_NEAR(gelu(-10.0), 0.0, 1e-6);
  EXPECT_NEAR(gelu_derivative(0.0), 0.5, 1e-15);
}

TEST(MaskedSoftmax, UniformKeepFour) {
  const Tensor logits = Tensor::full({1, 6}, 0.3);
  const Tensor p = masked_softmax(logits, {{0, 2, 3, 5}});
  for (std::size_t j : {0, 2, 3, 5}) EXPECT_DOUBLE_EQ(p[j], 0.25);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_EQ(p[4], 0.0);
}

TEST(MaskedSoftmax, SingleKeptEntryIsOne) {
  const Tensor p = masked_softmax(Tensor({1, 3}, {4.0, -1.0, 2.0}), {{1}});
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[1], 1.0);
  EXPECT_EQ(p[2], 0.0);
}

TEST(MaskedSoftmax, LogTwoGivesThirds) {
  const Tensor p = masked_softmax(Tensor({1, 2}, {0.0, std::log(2.0)}), {{0, 1}});
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-15);
}

TEST(MaskedSoftmax, EmptyKeepSetThrows) {
  EXPECT_THROW(masked_softmax(Tensor({2, 2}), {{0}, {}}), Error);
  EXPECT_THROW(masked_softmax(Tensor({1, 2}), {{2}}), Error);
}

TEST(GroupNorm, ConstantInputGivesZero) {
  const Tensor x = Tensor::full({2, 4, 3, 3}, 5.5);
  const Tensor y = group_norm(x, make_group_norm(4, 2));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(GroupNorm, GroupStatisticsAreStandard) {
  const Tensor x = random_tensor({1, 8, 4, 4}, 11, -3.0, 5.0);
  const Tensor y = group_norm(x, make_group_norm(8, 2, 1e-12));
  const std::size_t per_group = 4 * 16;
  for (std::size_t g = 0; g < 2; ++g) {
    const auto span = y.data().subspan(g * per_group, per_group);
    const double mean = exact_mean(span);
    double var = 0.0;
    for (double v : span) var += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var / per_group, 1.0, 1e-6);
  }
}

TEST(GroupNorm, OneGroupPerChannelIsInstanceNorm) {
  const Tensor x = random_tensor({2, 3, 4, 5}, 5);
  const Tensor y = group_norm(x, make_group_norm(3, 3));
  const std::size_t hw = 20;
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t base = (b * 3 + c) * hw;
      double mean = 0.0, var = 0.0;
      for (std::size_t i = 0; i < hw; ++i) mean += x[base + i];
      mean /= hw;
      for (std::size_t i = 0; i < hw; ++i) var += (x[base + i] - mean) * (x[base + i] - mean);
      var /= hw;
      for (std::size_t i = 0; i < hw; ++i) {
        EXPECT_NEAR(y[base + i], (x[base + i] - mean) / std::sqrt(var + 1e-5), 1e-12);
      }
    }
  }
}

TEST(GroupNorm, DefaultGroups) {
  EXPECT_EQ(default_num_groups(32), 16u);
  EXPECT_EQ(default_num_groups(8), 8u);
  EXPECT_EQ(default_num_groups(20), 10u);
}

TEST(Upsample, NearestBlocks) {
  const Tensor y = nearest_upsample(plane(2, 2, {1, 2, 3, 4}), 2);
  const std::vector<double> want{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), want);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
}

TEST(Upsample, NearestScaleOneAndL1Growth) {
  const Tensor x = random_tensor({1, 2, 3, 3}, 1);
  EXPECT_EQ(nearest_upsample(x, 1), x);
  const Tensor ones = Tensor::full({1, 1, 2, 2}, 1.0);
  const Tensor big = nearest_upsample(ones, 3);
  EXPECT_EQ(big.shape(), (Shape{1, 1, 6, 6}));
  EXPECT_EQ(l1_norm(ones), 4.0);
  EXPECT_EQ(l1_norm(big), 36.0);
}

TEST(Upsample, ZeroInsert) {
  const Tensor y = zero_insert_upsample(plane(1, 1, {1}), 2);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{1, 0, 0, 0}));
  const Tensor x = random_tensor({1, 2, 3, 3}, 2);
  EXPECT_EQ(zero_insert_upsample(x, 1), x);
}

TEST(ChannelShuffle, FourChannelLabels) {
  Tensor x({1, 4, 1, 1}, {10, 11, 12, 13});
  const Tensor y = channel_shuffle(x);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{10, 12, 11, 13}));
  EXPECT_EQ(channel_shuffle(y), x);
}

TEST(ChannelShuffle, TwoChannelsUnchanged) {
  const Tensor x = random_tensor({2, 2, 3, 3}, 4);
  EXPECT_EQ(channel_shuffle(x), x);
}

TEST(ChannelShuffle, OddChannelsThrow) { EXPECT_THROW(channel_shuffle(Tensor({1, 3, 2, 2})), ShapeError); }

TEST(Spectrum, BlockAverageOfTwoByTwo) {
  using C = std::complex<double>;
  const ComplexSpectrum z({1, 1, 2, 2}, {C(1, 2), C(3, -1), C(-2, 0.5), C(6, 4)});
  const ComplexSpectrum avg = block_avg_spectrum(z, 2);
  ASSERT_EQ(avg.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_NEAR(avg[0].real(), 2.0, 1e-15);
  EXPECT_NEAR(avg[0].imag(), 1.375, 1e-15);
}

TEST(Spectrum, BlockAverageIdentitiesAndErrors) {
  using C = std::complex<double>;
  const ComplexSpectrum z = fft2(random_tensor({1, 2, 6, 6}, 9));
  const ComplexSpectrum same = block_avg_spectrum(z, 1);
  for (std::size_t i = 0; i < z.numel(); ++i) EXPECT_EQ(same[i], z[i]);

  const ComplexSpectrum constant({1, 1, 6, 6}, std::vector<C>(36, C(0.7, -0.3)));
  for (std::size_t s : {2, 3, 6}) {
    const ComplexSpectrum avg = block_avg_spectrum(constant, s);
    for (const C& v : avg.data()) EXPECT_EQ(v, C(0.7, -0.3));
  }
  EXPECT_THROW(block_avg_spectrum(z, 4), ShapeError);
}

TEST(Spectrum, RepeatTiles) {
  using C = std::complex<double>;
  const ComplexSpectrum one({1, 1, 1, 1}, {C(2, -5)});
  const ComplexSpectrum r = repeat_spectrum(one, 2);
  ASSERT_EQ(r.shape(), (Shape{1, 1, 2, 2}));
  for (const C& v : r.data()) EXPECT_EQ(v, C(2, -5));
  const ComplexSpectrum z = fft2(random_tensor({1, 1, 4, 4}, 3));
  const ComplexSpectrum same = repeat_spectrum(z, 1);
  for (std::size_t i = 0; i < z.numel(); ++i) EXPECT_EQ(same[i], z[i]);
  // Averaging a repeated spectrum gives the original back.
  const ComplexSpectrum back = block_avg_spectrum(repeat_spectrum(z, 3), 3);
  for (std::size_t i = 0; i < z.numel(); ++i) EXPECT_EQ(back[i], z[i]);
}

TEST(Fft, DeltaGivesOnes) {
  Tensor delta({1, 1, 5, 6});
  delta[0] = 1.0;
  const ComplexSpectrum spectrum = fft2(delta);
  for (const auto& v : spectrum.data()) {
    EXPECT_EQ(v.real(), 1.0);
    EXPECT_EQ(v.imag(), 0.0);
  }
}

TEST(Fft, RoundTripEightByEight) {
  const Tensor x = random_tensor({1, 1, 8, 8}, 21);
  EXPECT_LE(max_abs_diff(ifft2(fft2(x)), x), 1e-10);
}

TEST(Fft, ResidueOfRealSpectrumIsTiny) {
  const RealInverse inv = ifft2_with_residue(fft2(random_tensor({1, 2, 6, 10}, 4)));
  EXPECT_LE(inv.max_imag, 1e-14);
}

TEST(Reductions, ExactSumCancels) {
  const std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  EXPECT_EQ(exact_sum(v), 2.0);
  EXPECT_EQ(exact_mean(v), 0.5);
}

TEST(Reductions, RelativeErrorFloor) {
  const Tensor a({2}, {0.0, 1.0});
  const Tensor b({2}, {1e-9, 1.0});
  EXPECT_NEAR(max_rel_err(a, b), 1e-9 / 1e-8, 1e-12);
}

TEST(TensorBasics, F32StorageRounds) {
  const Tensor t = Tensor({1}, {0.1}).to(DType::f32);
  EXPECT_EQ(t[0], static_cast<double>(0.1f));
  EXPECT_EQ(t.dtype(), DType::f32);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0}), Error);
}
