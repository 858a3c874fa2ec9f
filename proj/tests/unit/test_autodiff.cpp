#include <cmath>

#include <gtest/gtest.h>

#include "dfir/autodiff.hpp"
#include "dfir/gradcheck.hpp"
#include "dfir/random.hpp"

using namespace dfir;

TEST(Tape, SquareGradient) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", Tensor({1}, {3.0}));
  const ad::Gradients g = tape.backward(ad::sum(ad::mul(x, x)));
  EXPECT_EQ(g.at("x")[0], 6.0);
}

TEST(Tape, ConvInputGradientCountsOverlap) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", random_tensor({1, 1, 3, 3}, 1));
  const ad::Var w = tape.constant(Tensor::full({1, 1, 3, 3}, 1.0));
  const ad::Gradients g = tape.backward(ad::sum(ad::conv2d(x, w, std::nullopt)));
  const Tensor& gx = g.at("x");
  EXPECT_EQ(gx.at(0, 0, 1, 1), 9.0);
  EXPECT_EQ(gx.at(0, 0, 0, 0), 4.0);
  EXPECT_EQ(gx.at(0, 0, 2, 0), 4.0);
  EXPECT_EQ(gx.at(0, 0, 1, 0), 6.0);
}

TEST(Tape, NonScalarLossThrows) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", Tensor({2}, {1.0, 2.0}));
  EXPECT_THROW(tape.backward(x), Error);
}

TEST(Tape, UnreachedParameterGetsZeroGradient) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", Tensor({2}, {1.0, 2.0}));
  tape.parameter("unused", Tensor({3}, {1.0, 2.0, 3.0}));
  const ad::Gradients g = tape.backward(ad::sum(x));
  ASSERT_TRUE(g.contains("unused"));
  for (double v : g.at("unused").data()) EXPECT_EQ(v, 0.0);
}

TEST(Tape, FftRoundTripGradientIsOnes) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", random_tensor({1, 2, 4, 6}, 5));
  const ad::Gradients g = tape.backward(ad::sum(ad::ifft2_real(ad::fft2(x))));
  for (double v : g.at("x").data()) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(Tape, BackwardVisitsEachNodeOnce) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", Tensor({1}, {2.0}));
  ad::Var y = x;
  for (int i = 0; i < 10; ++i) y = ad::add(y, y);
  const ad::Gradients g = tape.backward(ad::sum(y));
  EXPECT_EQ(g.at("x")[0], 1024.0);
  EXPECT_LE(tape.last_backward_visits(), tape.size());
}

TEST(FiniteDiff, SumGivesOnes) {
  const Tensor at = random_tensor({5}, 2);
  const Tensor g = finite_diff([](const Tensor& t) { return sum(t); }, at, 1e-6);
  for (double v : g.data()) EXPECT_NEAR(v, 1.0, 1e-8);
}

TEST(FiniteDiff, SumOfSquares) {
  const Tensor g = finite_diff(
      [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.data()) s += v * v;
        return s;
      },
      Tensor({2}, {1.0, 2.0}), 1e-6);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
}

TEST(FiniteDiff, GeluSlopeAtZero) {
  const Tensor g = finite_diff([](const Tensor& t) { return sum(gelu(t)); }, Tensor({3}), 1e-6);
  for (double v : g.data()) EXPECT_NEAR(v, 0.5, 1e-6);
}

TEST(FiniteDiff, NanThrows) {
  EXPECT_THROW(finite_diff([](const Tensor&) { return NAN; }, Tensor({1}), 1e-6), NumericError);
}

TEST(CheckGradients, ConvWithBias) {
  Rng rng(8);
  const std::map<std::string, Tensor> leaves{{"x", random_tensor({1, 2, 4, 4}, rng)},
                                             {"w", random_tensor({3, 2, 3, 3}, rng)},
                                             {"b", random_tensor({3}, rng)}};
  const Tensor weights = random_tensor({1, 3, 4, 4}, rng);
  const auto reports = check_gradients(
      "conv2d", leaves,
      [&](ad::Tape&, const std::map<std::string, ad::Var>& v) {
        return ad::weighted_sum(ad::conv2d(v.at("x"), v.at("w"), v.at("b")), weights);
      });
  ASSERT_EQ(reports.size(), 3u);
  for (const GradReport& r : reports) EXPECT_TRUE(r.pass) << r.param_name << " err " << r.max_rel_err;
}
