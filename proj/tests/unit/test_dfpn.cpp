#include <gtest/gtest.h>

#include "dfir/dfpn.hpp"

using namespace dfir;

namespace {

ParamStore lateral(std::size_t high, std::size_t low, std::uint64_t seed) {
  ParamStore p;
  Rng rng(seed);
  init_anup_params(p, "", high, low, rng);
  return p;
}

}  // namespace

TEST(Anup, OnesTwoByTwoKeepsMass) {
  const Tensor high = Tensor::full({1, 1, 2, 2}, 1.0);
  AnupStages stages;
  anup(high, Tensor({1, 1, 4, 4}), 2, lateral(1, 1, 1), "", &stages);
  ASSERT_EQ(stages.normalized.shape(), (Shape{1, 1, 4, 4}));
  for (double v : stages.normalized.data()) EXPECT_EQ(v, 0.25);
  EXPECT_EQ(l1_norm(stages.normalized), 4.0);
  EXPECT_EQ(l1_norm(stages.upsampled), 16.0);
}

TEST(Anup, ScaleOneLeavesHighUnchanged) {
  const Tensor high = random_tensor({1, 3, 4, 4}, 2);
  EXPECT_EQ(amplitude_normalize(high, 1), high);
}

TEST(Anup, MassIsExactForRandomInput) {
  for (std::size_t s : {2, 3, 4}) {
    const Tensor high = random_tensor({2, 3, 5, 4}, 10 + s, 0.0, 1.0);
    EXPECT_EQ(l1_norm(amplitude_normalize(high, s)), l1_norm(high)) << "s=" << s;
  }
}

TEST(Anup, BlockSumsMatchSource) {
  const Tensor high = random_tensor({1, 1, 3, 3}, 5);
  const Tensor up = amplitude_normalize(high, 3);
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t w = 0; w < 3; ++w) {
      double block = 0.0;
      for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t n = 0; n < 3; ++n) block += up.at(0, 0, 3 * h + m, 3 * w + n);
      EXPECT_NEAR(block, high.at(0, 0, h, w), 1e-15);
    }
}

TEST(Anup, ExtentMismatchThrows) {
  const ParamStore p = lateral(2, 2, 3);
  try {
    anup(Tensor({1, 2, 2, 2}), Tensor({1, 2, 4, 5}), 2, p);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.dimension(), "width");
  }
}

TEST(Dpsc, ShapeContract) {
  for (DpscPath2 path : {DpscPath2::cascaded, DpscPath2::from_input}) {
    ParamStore p;
    Rng rng(4);
    init_dpsc_params(p, "", 8, path, rng);
    EXPECT_EQ(dpsc(random_tensor({1, 8, 6, 6}, 5), p, path).shape(), (Shape{1, 8, 6, 6}));
  }
}

TEST(Dpsc, ZeroWeightsGiveHalfAndZeroChannels) {
  ParamStore p;
  Rng rng(6);
  init_dpsc_params(p, "", 4, DpscPath2::cascaded, rng);
  p.zero_matching("");
  const Tensor y = dpsc(random_tensor({1, 4, 3, 3}, 7), p);
  // Concat [s0, s1, d0, d1] shuffles to [s0, d0, s1, d1].
  const double want[] = {0.5, 0.0, 0.5, 0.0};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[c * 9 + i], want[c]) << "channel " << c;
}

TEST(Dpsc, OddChannelsThrow) {
  ParamStore p;
  Rng rng(6);
  init_dpsc_params(p, "", 4, DpscPath2::cascaded, rng);
  EXPECT_THROW(dpsc(Tensor({1, 5, 3, 3}), p), ShapeError);
}

TEST(Dfpn, TwoLevelShapes) {
  DfpnConfig c;
  c.channels = {8, 8};
  const PyramidLevels pyr{{random_tensor({1, 8, 8, 8}, 1), random_tensor({1, 8, 4, 4}, 2)}};
  const PyramidLevels out = dfpn_fuse(pyr, c, init_dfpn_params(c, 3));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.levels[0].shape(), (Shape{1, 8, 8, 8}));
  EXPECT_EQ(out.levels[1].shape(), (Shape{1, 8, 4, 4}));
}

TEST(Dfpn, ThreeLevelCallCounts) {
  DfpnConfig c;
  c.channels = {8, 16, 8};
  const PyramidLevels pyr{
      {random_tensor({1, 8, 8, 8}, 1), random_tensor({1, 16, 4, 4}, 2), random_tensor({1, 8, 2, 2}, 3)}};
  FuseTrace trace;
  dfpn_fuse(pyr, c, init_dfpn_params(c, 4), &trace);
  EXPECT_EQ(trace.anup_calls, 2u);
  EXPECT_EQ(trace.dpsc_calls, 3u);
}

TEST(Dfpn, SingleLevelIsDpsc) {
  DfpnConfig c;
  c.channels = {6};
  const ParamStore p = init_dfpn_params(c, 5);
  const Tensor x = random_tensor({1, 6, 4, 4}, 6);
  FuseTrace trace;
  const PyramidLevels out = dfpn_fuse(PyramidLevels{{x}}, c, p, &trace);
  EXPECT_EQ(trace.anup_calls, 0u);
  EXPECT_EQ(out.levels[0], dpsc(x, p, DpscPath2::cascaded, "dpsc.0."));
}

TEST(Dfpn, ZeroPyramidGivesSigmoidFloor) {
  // Zero input and zero biases leave the semantic channels at sigmoid(0), not zero.
  DfpnConfig c;
  c.channels = {4, 4};
  ParamStore p = init_dfpn_params(c, 7);
  p.zero_matching("", "bias");
  const PyramidLevels out = dfpn_fuse(PyramidLevels{{Tensor({1, 4, 4, 4}), Tensor({1, 4, 2, 2})}}, c, p);
  for (const Tensor& level : out.levels) {
    const std::size_t hw = level.height() * level.width();
    for (std::size_t ch : {0, 2})
      for (std::size_t i = 0; i < hw; ++i) EXPECT_EQ(level[ch * hw + i], 0.5);
  }
  // With the semantic convolution zeroed as well, detail channels are exactly zero.
  p.zero_matching("", "conv.weight");
  const PyramidLevels flat = dfpn_fuse(PyramidLevels{{Tensor({1, 4, 4, 4}), Tensor({1, 4, 2, 2})}}, c, p);
  for (const Tensor& level : flat.levels) {
    const std::size_t hw = level.height() * level.width();
    for (std::size_t ch : {1, 3})
      for (std::size_t i = 0; i < hw; ++i) EXPECT_EQ(level[ch * hw + i], 0.0);
  }
}

TEST(Dfpn, MisalignedPyramidNamesLevel) {
  DfpnConfig c;
  c.channels = {4, 4};
  const ParamStore p = init_dfpn_params(c, 8);
  try {
    dfpn_fuse(PyramidLevels{{Tensor({1, 4, 8, 8}), Tensor({1, 4, 3, 4})}}, c, p);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.dimension(), "level 1");
  }
}
