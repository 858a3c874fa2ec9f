#include <cmath>

#include <gtest/gtest.h>

#include "dfir/fft.hpp"
#include "dfir/firc3.hpp"
#include "dfir/oracles.hpp"

using namespace dfir;

TEST(Periodize, DeltaGivesOnes) {
  const PeriodizedKernel k = periodize_kernel(delta_taps(2, 3), 8, 8);
  for (const auto& v : k.otf.data()) {
    EXPECT_NEAR(v.real(), 1.0, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
  }
}

TEST(Periodize, SoftmaxTapsHaveUnitDcGain) {
  Rng rng(1);
  const PeriodizedKernel k = periodize_kernel(softmax_taps(4, 5, rng), 8, 12);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(k.otf.at(0, c, 0, 0).real(), 1.0, 1e-14);
}

TEST(Periodize, MatchesSpatialCircularConvolution) {
  Rng rng(2);
  const Tensor taps = random_tensor({3, 3, 3}, rng);
  const Tensor x = random_tensor({1, 3, 8, 8}, rng);
  const PeriodizedKernel k = periodize_kernel(taps, 8, 8);
  ComplexSpectrum X = fft2(x);
  for (std::size_t i = 0; i < X.numel(); ++i) X[i] *= k.otf[i];
  EXPECT_LE(max_abs_diff(ifft2(X), oracle::circular_conv2d_reference(x, taps)), 1e-8);
}

TEST(Periodize, KernelLargerThanExtentThrows) {
  EXPECT_THROW(periodize_kernel(delta_taps(1, 5), 4, 8), ShapeError);
}

TEST(Regularization, StronglyNegativeBiasStaysNearEps) {
  const Tensor eps = regularization(Tensor({2}, {-20.0, -20.0}));
  for (double v : eps.data()) {
    EXPECT_GT(v, 1e-5);
    EXPECT_LT(v, 1e-5 + 1e-12);
  }
}

TEST(Firc, DeltaKernelIsIdentity) {
  FircConfig c;
  c.channels = 3;
  const Tensor x = random_tensor({2, 3, 8, 8}, 3);
  const Tensor y = firc(x, periodize_kernel(delta_taps(3, 3), 8, 8), Tensor({3}), c);
  EXPECT_LE(max_abs_diff(y, x), 1e-8);
}

TEST(Firc, ScaleOneMatchesClosedForm) {
  Rng rng(4);
  FircConfig c;
  c.channels = 4;
  const Tensor b = random_tensor({4}, rng, -3.0, 3.0);
  const PeriodizedKernel k = periodize_kernel(random_tensor({4, 3, 3}, rng), 8, 8);
  const Tensor x = random_tensor({1, 4, 8, 8}, rng);
  const Tensor eps = regularization(b, c.eps);
  const std::vector<double> eps_b(eps.data().begin(), eps.data().end());
  EXPECT_LE(max_rel_err(firc(x, k, b, c), oracle::firc_closed_form_reference(x, k, eps_b)), 1e-8);
}

TEST(Firc, NegativeBiasStaysFinite) {
  Rng rng(5);
  for (std::size_t s : {1, 2}) {
    FircConfig c;
    c.channels = 4;
    c.scale = s;
    const PeriodizedKernel k = periodize_kernel(softmax_taps(4, 3, rng), 8 * s, 8 * s);
    FircStages stages;
    const Tensor y = firc(random_tensor({1, 4, 8, 8}, rng), k, Tensor::full({4}, -20.0), c, &stages);
    EXPECT_TRUE(y.all_finite());
    EXPECT_EQ(y.shape(), (Shape{1, 4, 8 * s, 8 * s}));
    EXPECT_TRUE(stages.residual.all_finite());
    EXPECT_TRUE(stages.output.all_finite());
  }
}

TEST(Firc, NonFiniteInputNamesStage) {
  FircConfig c;
  c.channels = 1;
  Tensor x({1, 1, 4, 4});
  x[5] = NAN;
  try {
    firc(x, periodize_kernel(delta_taps(1, 3), 4, 4), Tensor({1}), c);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_FALSE(e.stage().empty());
  }
}

TEST(Firc, KernelExtentMismatchThrows) {
  FircConfig c;
  c.channels = 1;
  c.scale = 2;
  EXPECT_THROW(firc(Tensor({1, 1, 4, 4}), periodize_kernel(delta_taps(1, 3), 4, 4), Tensor({1}), c), ShapeError);
}

TEST(Firc3Block, EmptyCascadeIsDualProjection) {
  FircConfig c;
  c.channels = 8;
  c.iterations = 0;
  const ParamStore p = init_firc3_params(c, 1);
  const Tensor x = random_tensor({1, 8, 6, 6}, 2);
  const Tensor sum = add(conv2d(x, p.get("cv1.weight"), p.get("cv1.bias")), conv2d(x, p.get("cv2.weight"), p.get("cv2.bias")));
  EXPECT_EQ(firc3_block(x, c, p), conv2d(sum, p.get("cv3.weight"), p.get("cv3.bias")));
}

TEST(Firc3Block, DeltaCascadeMatchesEmptyCascade) {
  FircConfig c;
  c.channels = 8;
  c.iterations = 2;
  ParamStore p = init_firc3_params(c, 3);
  for (std::size_t i = 0; i < 2; ++i) p.set("m." + std::to_string(i) + ".taps", delta_taps(4, 3));
  FircConfig none = c;
  none.iterations = 0;
  const Tensor x = random_tensor({1, 8, 8, 8}, 4);
  EXPECT_LE(max_rel_err(firc3_block(x, c, p), firc3_block(x, none, p)), 1e-8);
}

TEST(Firc3Block, HiddenWidthAndShape) {
  FircConfig c;
  c.channels = 16;
  EXPECT_EQ(c.hidden_channels(), 8u);
  const ParamStore p = init_firc3_params(c, 5);
  EXPECT_EQ(p.get("cv1.weight").shape(), (Shape{8, 16, 1, 1}));
  const Tensor x = random_tensor({1, 16, 8, 8}, 6);
  EXPECT_EQ(firc3_block(x, c, p).shape(), x.shape());
}

TEST(Firc3Block, ChannelMismatchThrows) {
  FircConfig c;
  c.channels = 16;
  EXPECT_THROW(firc3_block(Tensor({1, 8, 8, 8}), c, init_firc3_params(c, 7)), ShapeError);
}
